import json

import pytest

from cohortguard.cli import main
from cohortguard.synth import SynthSpec, generate_cohort, write_fixture

from helpers import make_record, toy_dataset
from cohortguard import write_manifest, write_embeddings


@pytest.fixture
def fixture_dir(tmp_path):
    # seed picked so both languages get at least three speakers
    spec = SynthSpec(
        n_speakers=6,
        samples_per_speaker_mean=4,
        samples_per_speaker_jitter=1,
        dim=24,
        noise_sigma=0.08,
        seed=503,
        languages=(("de", 1.0), ("es", 1.0)),
        duplicate_injections=1,
    )
    ds, gt = generate_cohort(spec)
    write_fixture(ds, tmp_path / "m.jsonl", tmp_path / "e.svem")
    return tmp_path, ds, gt


def run(*argv):
    return main([str(a) for a in argv])


class TestValidate:
    def test_valid_fixture_summary(self, fixture_dir, capsys):
        d, ds, _ = fixture_dir
        code = run("validate", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem")
        captured = capsys.readouterr()
        assert code == 0
        assert captured.out == ""
        assert f"speakers={len(ds.speakers)}" in captured.err
        assert f"samples={len(ds.records)}" in captured.err
        assert "dim=24" in captured.err

    def test_truncated_svem_exit_3(self, fixture_dir, capsys):
        d, _, _ = fixture_dir
        raw = (d / "e.svem").read_bytes()
        (d / "bad.svem").write_bytes(raw[:-8])
        code = run("validate", "--manifest", d / "m.jsonl", "--embeddings", d / "bad.svem")
        err = capsys.readouterr().err
        assert code == 3
        assert "expected" in err and "found" in err

    def test_orphan_row_exit_1_names_sample(self, tmp_path, capsys):
        ds = toy_dataset(["A", "A", "B"])
        records = list(ds.records) + [make_record("ghost", "B", 99)]
        write_manifest(records, tmp_path / "m.jsonl")
        write_embeddings(ds.matrix, tmp_path / "e.svem")
        code = run(
            "validate", "--manifest", tmp_path / "m.jsonl", "--embeddings", tmp_path / "e.svem"
        )
        err = capsys.readouterr().err
        assert code == 1
        assert "ghost" in err

    def test_collects_multiple_manifest_problems(self, tmp_path, capsys):
        ds = toy_dataset(["A", "A"])
        write_embeddings(ds.matrix, tmp_path / "e.svem")
        lines = [
            json.dumps(
                {
                    "sample_id": "ok1",
                    "speaker_id": "A",
                    "language": "en",
                    "task": "picture_description",
                    "session_index": 0,
                    "audio_duration_sec": 10.0,
                    "speech_duration_sec": 5.0,
                    "embedding_row": 0,
                }
            ),
            "{broken",
            json.dumps(
                {
                    "sample_id": "bad_task",
                    "speaker_id": "A",
                    "language": "en",
                    "task": "opera",
                    "session_index": 0,
                    "audio_duration_sec": 10.0,
                    "speech_duration_sec": 5.0,
                    "embedding_row": 1,
                }
            ),
        ]
        (tmp_path / "m.jsonl").write_text("\n".join(lines) + "\n")
        code = run(
            "validate", "--manifest", tmp_path / "m.jsonl", "--embeddings", tmp_path / "e.svem"
        )
        err = capsys.readouterr().err
        assert code == 3  # format problems dominate the exit code
        assert ":2: malformed" in err
        assert "opera" in err

    def test_missing_file_exit_3(self, tmp_path, capsys):
        code = run(
            "validate", "--manifest", tmp_path / "nope.jsonl", "--embeddings", tmp_path / "e.svem"
        )
        assert code == 3


class TestStats:
    def test_csv_per_language_rows(self, fixture_dir, capsys):
        d, ds, _ = fixture_dir
        code = run("stats", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem")
        out = capsys.readouterr().out
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("scope,n_speakers")
        assert len(lines) == 2 + len(ds.languages)


class TestPairs:
    def test_plain_dump(self, fixture_dir, capsys):
        d, ds, _ = fixture_dir
        code = run(
            "pairs", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
            "--language", "de",
        )
        out = capsys.readouterr().out
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "sample_id_a,sample_id_b,label"
        assert all(line.count(",") == 2 for line in lines[1:])

    def test_scored_dump_nine_significant_digits(self, fixture_dir, tmp_path, capsys):
        d, _, _ = fixture_dir
        out_file = tmp_path / "scored.csv"
        code = run(
            "pairs", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
            "--with-scores", "--out", out_file,
        )
        assert code == 0
        assert capsys.readouterr().out == ""
        lines = out_file.read_text().splitlines()
        assert lines[0] == "sample_id_a,sample_id_b,label,score"
        score = lines[1].rsplit(",", 1)[1]
        assert float(score) != 0.0
        digits = score.replace("-", "").replace(".", "").lstrip("0")
        assert len(digits) <= 9

    def test_empty_scope_is_validation_error(self, fixture_dir, capsys):
        d, _, _ = fixture_dir
        code = run(
            "pairs", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
            "--language", "xx",
        )
        assert code == 1


class TestEval:
    def test_two_language_fixture_two_rows(self, fixture_dir, capsys):
        d, _, _ = fixture_dir
        code = run(
            "eval", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
            "--group-by", "language",
        )
        out = capsys.readouterr().out
        assert code == 0
        rows = [l for l in out.splitlines() if l and not l.startswith("#")]
        assert len(rows) == 1 + 2  # header + de + es

    def test_group_by_task_rows(self, tmp_path, capsys):
        tasks = ["picture_description"] * 4 + ["phonemic_fluency"] * 4
        ds = toy_dataset(["A", "A", "B", "B"] * 2, tasks=tasks, seed=33)
        write_manifest(ds.records, tmp_path / "m.jsonl")
        write_embeddings(ds.matrix, tmp_path / "e.svem")
        code = run(
            "eval", "--manifest", tmp_path / "m.jsonl", "--embeddings", tmp_path / "e.svem",
            "--group-by", "task",
        )
        out = capsys.readouterr().out
        assert code == 0
        rows = [l for l in out.splitlines() if l and not l.startswith("#")]
        assert len(rows) == 3
        assert any("phonemic_fluency" in r for r in rows)

    def test_single_speaker_exit_2(self, tmp_path, capsys):
        ds = toy_dataset(["A", "A", "A"])
        write_manifest(ds.records, tmp_path / "m.jsonl")
        write_embeddings(ds.matrix, tmp_path / "e.svem")
        code = run(
            "eval", "--manifest", tmp_path / "m.jsonl", "--embeddings", tmp_path / "e.svem",
        )
        assert code == 2


class TestDet:
    def test_separable_fixture_hits_origin(self, tmp_path, capsys):
        ds = toy_dataset(["A", "A", "B", "B"], sigma=0.0, seed=44)
        write_manifest(ds.records, tmp_path / "m.jsonl")
        write_embeddings(ds.matrix, tmp_path / "e.svem")
        code = run(
            "det", "--manifest", tmp_path / "m.jsonl", "--embeddings", tmp_path / "e.svem",
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "0.0,0.0" in out.splitlines()


class TestCalibrate:
    def test_per_language_rows(self, fixture_dir, capsys):
        d, _, _ = fixture_dir
        code = run(
            "calibrate", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
        )
        out = capsys.readouterr().out
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "scope,n_pos,n_neg,eer_pct,threshold,tpr,tnr,interpolated"
        assert len(lines) == 3
        assert lines[1].startswith("m/de,")
        assert lines[2].startswith("m/es,")

    def test_unreachable_target_exit_2(self, fixture_dir, capsys):
        d, _, _ = fixture_dir
        code = run(
            "calibrate", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
            "--policy", "target_fpr", "--target", "0.00000001",
        )
        assert code == 2


class TestDedup:
    def test_planted_duplicate_listed(self, fixture_dir, tmp_path, capsys):
        d, _, gt = fixture_dir
        scored_csv = tmp_path / "scored.csv"
        assert run(
            "pairs", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
            "--with-scores", "--out", scored_csv,
        ) == 0
        capsys.readouterr()
        out_csv = tmp_path / "dups.csv"
        code = run(
            "dedup", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
            "--calibrate-from", scored_csv, "--out", out_csv,
        )
        assert code == 0
        text = out_csv.read_text()
        (alias, true_spk), = gt.items()
        assert alias in text and true_spk in text

    def test_threshold_above_one_empty_clusters(self, fixture_dir, capsys):
        d, _, _ = fixture_dir
        code = run(
            "dedup", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
            "--threshold", "1.5",
        )
        captured = capsys.readouterr()
        assert code == 0
        data_lines = [
            l for l in captured.out.splitlines() if l and not l.startswith("#")
        ]
        assert data_lines == ["cluster_id,speaker_id,median_score_to_cluster,evidence_pairs"]

    def test_missing_embeddings_exit_3(self, fixture_dir, capsys):
        d, _, _ = fixture_dir
        code = run(
            "dedup", "--manifest", d / "m.jsonl", "--embeddings", d / "gone.svem",
            "--threshold", "0.5",
        )
        assert code == 3

    def test_requires_exactly_one_threshold_source(self, fixture_dir, capsys):
        d, _, _ = fixture_dir
        code = run(
            "dedup", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
        )
        assert code == 1


class TestBalance:
    def test_same_seed_identical_manifests(self, fixture_dir, tmp_path, capsys):
        d, _, _ = fixture_dir
        outs = []
        for name in ("b1.jsonl", "b2.jsonl"):
            out = tmp_path / name
            code = run(
                "balance", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
                "--target-speakers", 3, "--seed", 7, "--out", out,
            )
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_compacted_output_revalidates(self, fixture_dir, tmp_path, capsys):
        d, _, _ = fixture_dir
        out_m = tmp_path / "bal.jsonl"
        out_e = tmp_path / "bal.svem"
        assert run(
            "balance", "--manifest", d / "m.jsonl", "--embeddings", d / "e.svem",
            "--target-speakers", 3, "--seed", 7, "--out", out_m,
            "--out-embeddings", out_e,
        ) == 0
        assert run("validate", "--manifest", out_m, "--embeddings", out_e) == 0


class TestSynth:
    def test_synth_then_validate(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(
            json.dumps(
                {
                    "n_speakers": 4,
                    "samples_per_speaker_mean": 3,
                    "samples_per_speaker_jitter": 0,
                    "dim": 8,
                    "noise_sigma": 0.05,
                    "seed": 9,
                }
            )
        )
        out_dir = tmp_path / "fx"
        assert run("synth", "--spec", spec_path, "--out-dir", out_dir) == 0
        assert run(
            "validate",
            "--manifest", out_dir / "manifest.jsonl",
            "--embeddings", out_dir / "embeddings.svem",
        ) == 0
        meta = json.loads((out_dir / "synth_meta.json").read_text())
        assert meta["generator"] == "numpy-default-rng-pcg64"

    def test_bad_spec_exit_1(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text('{"n_speakers": 0}')
        assert run("synth", "--spec", spec_path, "--out-dir", tmp_path / "fx") == 1
