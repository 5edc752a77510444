import numpy as np
import pytest

from cohortguard import (
    BalanceSpec,
    BenchmarkConfig,
    UnknownLanguageError,
    ValidationError,
    balanced_subsample,
    cohort_stats,
    generate_cohort,
    language_proximity,
    plan_pairs,
    run_benchmark,
    stratify,
)
from cohortguard.harness import report_to_csv, report_to_text
from cohortguard.synth import SynthSpec

from helpers import counts_to_speakers, toy_dataset


def synth_cohort(seed=200, languages=(("en", 1.0),), n_speakers=12, sigma=0.1, **kw):
    spec = SynthSpec(
        n_speakers=n_speakers,
        samples_per_speaker_mean=4,
        samples_per_speaker_jitter=1,
        dim=48,
        noise_sigma=sigma,
        seed=seed,
        languages=tuple(languages),
        **kw,
    )
    return generate_cohort(spec)[0]


class TestStratify:
    def test_two_languages_disjoint_cover(self):
        ds = toy_dataset(
            ["A", "A", "B", "B"], languages=["en", "en", "de", "de"]
        )
        strata = stratify(ds, ["language"])
        assert [label for label, _ in strata] == [
            (("language", "de"),),
            (("language", "en"),),
        ]
        ids = [r.sample_id for _, sub in strata for r in sub.records]
        assert sorted(ids) == sorted(r.sample_id for r in ds.records)

    def test_single_task_single_stratum(self):
        ds = toy_dataset(["A", "A", "B"], tasks="picture_description")
        strata = stratify(ds, ["task"])
        assert len(strata) == 1
        assert strata[0][0] == (("task", "picture_description"),)

    def test_task_strata_report_counts(self):
        # a task-stratified report row carries that stratum's own
        # speaker/sample counts, e.g. 394 speakers over 1641 recordings
        speakers, tasks = [], []
        for i in range(394):
            n = 5 if i < 65 else 4
            speakers.extend([f"p{i:03d}"] * n)
            tasks.extend(["phonemic_fluency"] * n)
        speakers.extend(["extra1", "extra2", "extra3"])
        tasks.extend(["journaling"] * 3)
        ds = toy_dataset(speakers, tasks=tasks, dim=2, sigma=0.0)
        strata = dict(stratify(ds, ["task"]))
        sub = strata[(("task", "phonemic_fluency"),)]
        stats = cohort_stats(sub)
        assert stats.speaker_count == 394
        assert stats.total_samples == 1641

    def test_model_tag_defaults_to_untagged(self):
        ds = toy_dataset(["A", "A"], model_tags=[None, None])
        strata = stratify(ds, ["model_tag"])
        assert strata[0][0] == (("model_tag", "untagged"),)

    def test_unknown_key_rejected(self):
        ds = toy_dataset(["A", "A"])
        with pytest.raises(ValidationError, match="unknown strata"):
            stratify(ds, ["dialect"])
        with pytest.raises(ValidationError):
            stratify(ds, [])


class TestBalancedSubsample:
    def test_identity_when_target_matches(self):
        ds = toy_dataset(counts_to_speakers([2, 2, 2]))
        assert balanced_subsample(ds, 3, seed=1) is ds

    def test_target_29_of_69_keeps_full_sample_sets(self):
        ds = synth_cohort(seed=300, languages=(("da", 1.0),), n_speakers=69)
        sub = balanced_subsample(ds, 29, seed=4)
        assert len(sub.speakers) == 29
        full = {}
        for r in ds.records:
            full.setdefault(r.speaker_id, set()).add(r.sample_id)
        for spk in sub.speakers:
            kept = {r.sample_id for r in sub.records if r.speaker_id == spk}
            assert kept == full[spk]

    def test_same_seed_same_speakers(self):
        ds = synth_cohort(seed=301, n_speakers=30)
        s1 = balanced_subsample(ds, 10, seed=8)
        s2 = balanced_subsample(ds, 10, seed=8)
        assert s1.speakers == s2.speakers
        assert s1.records == s2.records

    def test_different_seeds_differ(self):
        ds = synth_cohort(seed=302, n_speakers=30)
        sets = {balanced_subsample(ds, 10, seed=s).speakers for s in range(6)}
        assert len(sets) > 1

    def test_too_few_speakers_rejected(self):
        ds = toy_dataset(["A", "B"])
        with pytest.raises(ValidationError, match="cannot balance"):
            balanced_subsample(ds, 5, seed=0)


class TestRunBenchmark:
    def test_five_language_cohort_gets_five_calibrated_rows(self):
        langs = ("en", "de", "da", "es", "ar")
        ds = synth_cohort(
            seed=400,
            languages=tuple((l, 1.0) for l in langs),
            n_speakers=25,
            sigma=0.15,
        )
        assert set(ds.languages) == set(langs)  # seed chosen to cover all five
        report = run_benchmark([ds], BenchmarkConfig(strata_keys=("language",)))
        assert len(report.rows) == 5
        assert all(r.status == "ok" for r in report.rows)
        assert len({r.threshold for r in report.rows}) == 5

    def test_single_speaker_stratum_marked_undefined(self):
        ds = toy_dataset(["A", "A", "B", "B"], languages=["en", "en", "de", "de"])
        solo = toy_dataset(["Z", "Z"], languages="ar", dataset_id="solo")
        report = run_benchmark(
            [ds, solo], BenchmarkConfig(strata_keys=("language",))
        )
        by_id = {(r.dataset_id, r.label): r for r in report.rows}
        assert by_id[("solo", (("language", "ar"),))].status.startswith("undefined")
        assert by_id[("solo", (("language", "ar"),))].eer_pct is None

    def test_counts_match_closed_forms(self):
        ds = synth_cohort(seed=401, languages=(("en", 1.0), ("de", 1.0)))
        report = run_benchmark([ds], BenchmarkConfig(strata_keys=("language",)))
        strata = dict(stratify(ds, ["language"]))
        for row in report.rows:
            plan = plan_pairs(cohort_stats(strata[row.label]))
            assert (row.n_pos, row.n_neg) == (plan.positive_count, plan.negative_count)

    def test_repeat_runs_identical(self):
        ds = synth_cohort(seed=402, languages=(("en", 1.0), ("ar", 1.0)))
        config = BenchmarkConfig(strata_keys=("language",))
        a = report_to_csv(run_benchmark([ds], config))
        b = report_to_csv(run_benchmark([ds], config))
        assert a == b

    def test_threads_do_not_change_output(self):
        ds = synth_cohort(seed=403, languages=(("en", 1.0), ("de", 1.0), ("es", 1.0)))
        serial = report_to_csv(
            run_benchmark([ds], BenchmarkConfig(strata_keys=("language",), threads=1))
        )
        threaded = report_to_csv(
            run_benchmark([ds], BenchmarkConfig(strata_keys=("language",), threads=4))
        )
        assert serial == threaded

    def test_balance_shares_subsample_across_model_tags(self):
        base = synth_cohort(seed=404, n_speakers=12)
        tagged = []
        rng = np.random.default_rng(405)
        for tag in ("alpha", "beta"):
            noise = rng.standard_normal(base.matrix.data.shape) * 0.01
            jittered = np.asarray(base.matrix.data + noise, dtype=np.float32)
            from cohortguard import EmbeddingMatrix, SampleRecord, bind_dataset

            offset = len(tagged)
            records = [
                SampleRecord(
                    sample_id=f"{tag}_{r.sample_id}",
                    speaker_id=r.speaker_id,
                    language=r.language,
                    task=r.task,
                    session_index=r.session_index,
                    audio_duration_sec=r.audio_duration_sec,
                    speech_duration_sec=r.speech_duration_sec,
                    embedding_row=r.embedding_row,
                    model_tag=tag,
                )
                for r in base.records
            ]
            tagged.append(
                bind_dataset(records, EmbeddingMatrix(jittered), f"ds_{tag}")
            )
        config = BenchmarkConfig(
            strata_keys=("language", "model_tag"),
            balance=BalanceSpec(target_speakers=6, seed=7),
        )
        report = run_benchmark(tagged, config)
        for row in report.rows:
            assert row.n_speakers == 6
        tags_seen = {dict(r.label)["model_tag"] for r in report.rows}
        assert tags_seen == {"alpha", "beta"}
        # both tags must evaluate the identical sample count: same speakers
        by_lang: dict[str, set[int]] = {}
        for row in report.rows:
            by_lang.setdefault(dict(row.label)["language"], set()).add(row.n_samples)
        assert all(len(counts) == 1 for counts in by_lang.values())
        assert report.provenance["balance_seed"] == 7

    def test_proximity_annotations_only_for_known_languages(self):
        ds = toy_dataset(
            ["A", "A", "B", "B", "C", "C"],
            languages=["en", "en", "de", "de", "fi", "fi"],
        )
        report = run_benchmark([ds], BenchmarkConfig(strata_keys=("language",)))
        assert report.proximity_annotations == (("de", "en", 31.3),)


class TestReportRendering:
    def test_csv_layout(self):
        ds = toy_dataset(["A", "A", "B", "B"], languages=["en", "en", "en", "en"])
        report = run_benchmark([ds], BenchmarkConfig(strata_keys=("language",)))
        text = report_to_csv(report)
        lines = text.splitlines()
        assert lines[0] == (
            "dataset,language,n_speakers,n_samples,avg_samples_per_speaker,"
            "n_pos,n_neg,eer_pct,threshold,tpr,tnr,status"
        )
        assert lines[1].startswith("toy,en,2,4,2.00±0.00,2,4,")
        assert lines[1].endswith(",ok")

    def test_text_tpr_tnr_column(self):
        ds = toy_dataset(
            ["A", "A", "B", "B"], languages="de", sigma=0.0, dataset_id="cohort"
        )
        report = run_benchmark([ds], BenchmarkConfig(strata_keys=("language",)))
        text = report_to_text(report)
        assert "TPR | TNR" in text
        assert "1.000 | 1.000" in text

    def test_pivot_one_eer_column_per_language(self):
        ds = toy_dataset(
            ["A", "A", "B", "B"] * 2,
            languages=["en"] * 4 + ["de"] * 4,
            model_tags=["alpha"] * 8,
        )
        report = run_benchmark(
            [ds], BenchmarkConfig(strata_keys=("language", "model_tag"))
        )
        text = report_to_text(report)
        assert "de EER(%)" in text and "en EER(%)" in text
        pivot_lines = [l for l in text.splitlines() if l.startswith("alpha")]
        assert len(pivot_lines) == 1


class TestLanguageProximity:
    EXPECTED = {
        ("en", "de"): 31.3,
        ("en", "da"): 24.6,
        ("en", "es"): 59.3,
        ("en", "ar"): 85.5,
        ("de", "da"): 28.3,
        ("de", "es"): 56.8,
        ("de", "ar"): 76.3,
        ("da", "es"): 51.4,
        ("da", "ar"): 84.9,
        ("es", "ar"): 76.6,
    }

    def test_en_de(self):
        assert language_proximity("en", "de") == 31.3

    def test_ar_en_symmetric(self):
        assert language_proximity("ar", "en") == 85.5
        assert language_proximity("ar", "en") == language_proximity("en", "ar")

    def test_diagonal_zero(self):
        for code in ("en", "de", "da", "es", "ar"):
            assert language_proximity(code, code) == 0.0

    def test_all_pairs(self):
        for (a, b), value in self.EXPECTED.items():
            assert language_proximity(a, b) == value
            assert language_proximity(b, a) == value

    def test_unknown_code(self):
        with pytest.raises(UnknownLanguageError):
            language_proximity("en", "fr")
