import json
import math
import statistics
import zlib

import numpy as np
import pytest

from mrcteval.evalbatch import (
    AggregateRow,
    BatchError,
    PairResult,
    aggregate,
    evaluate_manifest,
    evaluate_pair,
    rank_models,
    read_results,
    render_report,
    write_results,
)
from mrcteval.imageio import EvalManifest, PairRecord
from mrcteval.metrics import MetricRecord

# Published per-direction PSNR averages used as ranking fixtures.
MR2CT_PSNR = {
    "apple2orange": 28.63, "cityscapes_photo2label": 27.67,
    "cityscapes_label2photo": 27.61, "facades_label2photo": 28.36,
    "facades_photo2label": 27.67, "horse2zebra": 27.67,
    "iphone2dslr_flower": 30.98, "map2sat": 27.72, "monet2photo": 29.54,
    "orange2apple": 30.74, "sat2map": 26.82, "style_cezanne": 27.55,
    "style_monet": 27.56, "style_ukiyoe": 27.79, "style_vangogh": 27.80,
    "summer2winter_yosemite": 27.96, "winter2summer_yosemite": 29.22,
    "zebra2horse": 27.81,
}
CT2MR_PSNR = {
    "apple2orange": 29.55, "cityscapes_photo2label": 27.61,
    "cityscapes_label2photo": 27.27, "facades_label2photo": 28.16,
    "facades_photo2label": 27.62, "horse2zebra": 29.30,
    "iphone2dslr_flower": 34.36, "map2sat": 27.77, "monet2photo": 33.49,
    "orange2apple": 31.02, "sat2map": 26.70, "style_cezanne": 28.22,
    "style_monet": 27.78, "style_ukiyoe": 27.54, "style_vangogh": 27.74,
    "summer2winter_yosemite": 30.16, "winter2summer_yosemite": 30.79,
    "zebra2horse": 27.88,
}


def psnr_rows(table, direction):
    return [
        AggregateRow(
            model_id=model, direction=direction, n_pairs=10,
            psnr_avg=avg, psnr_std=0.5, psnr_infinite=0,
            ssim_avg=None, ssim_std=None, uqi_avg=None, uqi_std=None,
            vif_avg=None, vif_std=None,
        )
        for model, avg in table.items()
    ]


def make_pair(tmp_path, png_factory, name, offset=0.0, direction="MR2CT", model="m1"):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    ref = rng.integers(0, 200, (32, 32)).astype(np.float64)
    gen = np.clip(ref + offset, 0, 255)
    ref_path = png_factory(ref, name=f"{name}_ref.png")
    gen_path = png_factory(gen, name=f"{name}_gen.png")
    return PairRecord(
        model_id=model, category="", direction=direction,
        generated_path=str(gen_path), reference_path=str(ref_path),
    )


class TestEvaluatePair:
    def test_identity_pair(self, tmp_path, png_factory):
        record = make_pair(tmp_path, png_factory, "ident", offset=0.0)
        result = evaluate_pair(record)
        assert result.metrics.psnr_db == math.inf
        assert result.metrics.ssim == pytest.approx(1.0, abs=1e-12)
        assert result.metrics.uqi == pytest.approx(1.0, abs=1e-12)
        assert result.metrics.vif == pytest.approx(1.0, abs=1e-6)

    def test_uniform_offset_psnr(self, tmp_path, png_factory):
        record = make_pair(tmp_path, png_factory, "off5", offset=5.0)
        result = evaluate_pair(record, selection=("psnr",))
        assert result.metrics.psnr_db == pytest.approx(34.1514, abs=1e-3)
        assert result.metrics.ssim is None

    def test_unknown_metric(self, tmp_path, png_factory):
        record = make_pair(tmp_path, png_factory, "x")
        with pytest.raises(BatchError, match="unknown metric"):
            evaluate_pair(record, selection=("psnr", "niqe"))

    def test_missing_file_continues_batch(self, tmp_path, png_factory):
        good = make_pair(tmp_path, png_factory, "good")
        bad = PairRecord(
            model_id="m2", category="", direction="MR2CT",
            generated_path=str(tmp_path / "absent.png"),
            reference_path=good.reference_path,
        )
        manifest = EvalManifest(records=(good, bad))
        results, failures = evaluate_manifest(manifest, selection=("psnr",))
        assert len(results) == 1 and len(failures) == 1
        assert "not found" in failures[0].error


class TestAggregate:
    def two_psnr_results(self, values, model="m", direction="MR2CT"):
        return [
            PairResult(
                record=PairRecord(model, "", direction, f"g{i}.png", f"r{i}.png"),
                metrics=MetricRecord(psnr_db=v),
            )
            for i, v in enumerate(values)
        ]

    def test_mean_and_sample_std(self):
        rows = aggregate(self.two_psnr_results([30.0, 32.0]))
        assert rows[0].psnr_avg == pytest.approx(31.0, abs=1e-12)
        assert rows[0].psnr_std == pytest.approx(1.41421, abs=1e-5)
        assert rows[0].psnr_std == pytest.approx(statistics.stdev([30.0, 32.0]), abs=1e-12)

    def test_single_pair_zero_std(self):
        rows = aggregate(self.two_psnr_results([30.0]))
        assert rows[0].n_pairs == 1
        assert rows[0].psnr_avg == 30.0
        assert rows[0].psnr_std == 0.0

    def test_permutation_invariance(self):
        results = self.two_psnr_results([30.0, 32.0, 28.5, 31.25])
        results += self.two_psnr_results([20.0, 25.0], model="a")
        forward = aggregate(results)
        backward = aggregate(list(reversed(results)))
        assert forward == backward

    def test_infinite_psnr_excluded_and_counted(self):
        results = self.two_psnr_results([30.0, math.inf, 32.0])
        rows = aggregate(results)
        assert rows[0].n_pairs == 3
        assert rows[0].psnr_infinite == 1
        assert rows[0].psnr_avg == pytest.approx(31.0, abs=1e-12)

    def test_group_counts_partition_results(self):
        results = self.two_psnr_results([30.0, 31.0]) + self.two_psnr_results(
            [29.0], model="b", direction="CT2MR"
        )
        rows = aggregate(results)
        assert sum(r.n_pairs for r in rows) == len(results)

    def test_empty_rejected(self):
        with pytest.raises(BatchError):
            aggregate([])


class TestRankModels:
    def test_table_fixture_mr2ct(self):
        ranked = rank_models(psnr_rows(MR2CT_PSNR, "MR2CT"), "psnr", "MR2CT")
        assert ranked[0] == "iphone2dslr_flower"
        assert sorted(ranked) == sorted(MR2CT_PSNR)

    def test_table_fixture_ct2mr(self):
        ranked = rank_models(psnr_rows(CT2MR_PSNR, "CT2MR"), "psnr", "CT2MR")
        assert ranked[0] == "iphone2dslr_flower"

    def test_tie_breaks_by_model_id(self):
        rows = psnr_rows({"zeta": 30.0, "alpha": 30.0}, "MR2CT")
        assert rank_models(rows, "psnr", "MR2CT") == ["alpha", "zeta"]

    def test_unknown_metric(self):
        with pytest.raises(BatchError):
            rank_models(psnr_rows(MR2CT_PSNR, "MR2CT"), "mos", "MR2CT")


class TestRenderReport:
    row = AggregateRow(
        model_id="m1", direction="MR2CT", n_pairs=2,
        psnr_avg=31.0, psnr_std=1.4142135623730951, psnr_infinite=0,
        ssim_avg=0.5, ssim_std=0.1, uqi_avg=0.25, uqi_std=0.05,
        vif_avg=0.125, vif_std=0.025,
    )

    def test_markdown_golden(self):
        got = render_report([self.row], "markdown").decode("utf-8")
        expected = (
            "## MR2CT\n"
            "\n"
            "| Model | PSNR avg±std | SSIM avg±std | UQI avg±std | VIF avg±std |\n"
            "| --- | --- | --- | --- | --- |\n"
            "| m1 | 31.00 ±1.41 | 0.50 ±0.10 | 0.25 ±0.05 | 0.125 ±0.025 |\n"
        )
        assert got == expected

    def test_csv_line_count(self):
        rows = psnr_rows(MR2CT_PSNR, "MR2CT")
        text = render_report(rows, "csv").decode("utf-8")
        assert len(text.strip().split("\n")) == len(rows) + 1

    def test_json_round_trips_full_precision(self):
        payload = json.loads(render_report([self.row], "json").decode("utf-8"))
        assert payload[0]["psnr_std"] == self.row.psnr_std
        assert payload[0]["vif_avg"] == self.row.vif_avg

    def test_unknown_format(self):
        with pytest.raises(BatchError):
            render_report([self.row], "xml")

    def test_empty_rows(self):
        with pytest.raises(BatchError):
            render_report([], "markdown")


class TestResultsFile:
    def test_round_trip_with_error_entries(self, tmp_path, png_factory):
        good = make_pair(tmp_path, png_factory, "rt_good")
        bad = PairRecord("m9", "", "CT2MR", str(tmp_path / "no.png"), good.reference_path)
        manifest = EvalManifest(records=(good, bad))
        results, failures = evaluate_manifest(manifest, selection=("psnr", "ssim"))
        out = tmp_path / "results.jsonl"
        write_results(results, failures, out)
        results2, failures2 = read_results(out)
        assert results2 == results
        assert failures2 == failures

    def test_infinite_psnr_marker_round_trips(self, tmp_path, png_factory):
        record = make_pair(tmp_path, png_factory, "rt_inf", offset=0.0)
        results, _ = evaluate_manifest(EvalManifest(records=(record,)), selection=("psnr",))
        out = tmp_path / "results.jsonl"
        write_results(results, [], out)
        line = json.loads(out.read_text().splitlines()[0])
        assert line["psnr_db"] == "inf"
        restored, _ = read_results(out)
        assert restored[0].metrics.psnr_db == math.inf


class TestWorkerDeterminism:
    def test_results_bytes_stable_across_thread_counts(self, tmp_path, png_factory):
        records = tuple(
            make_pair(tmp_path, png_factory, f"w{i}", offset=float(i % 7), model=f"m{i % 3}")
            for i in range(12)
        )
        manifest = EvalManifest(records=records)
        outputs = []
        for threads in (1, 2, 8):
            results, failures = evaluate_manifest(manifest, threads=threads)
            path = tmp_path / f"r{threads}.jsonl"
            write_results(results, failures, path)
            outputs.append(path.read_bytes())
            report = render_report(aggregate(results), "markdown")
            outputs.append(report)
        assert outputs[0] == outputs[2] == outputs[4]
        assert outputs[1] == outputs[3] == outputs[5]
