"""Cost accounting: symbolic counts against the instrumented counter,
closed-form laws, monotonicity, baseline comparator."""

import json

import numpy as np
import pytest

from unihead import HeadConfig, build_head, profiler
from unihead.errors import ConfigError
from unihead.inputs import synthetic_input
from unihead.numkit import counting


def dynamic_counts(cfg: HeadConfig, H: int, W: int):
    head, _ = build_head(cfg)
    x = synthetic_input(H, W, cfg.C, seed=cfg.seed + 1)
    with counting.count() as c:
        head.forward(x)
    return c


class TestCounterAgreement:
    @pytest.mark.parametrize("cfg,H,W", [
        (HeadConfig(C=8, n_dp=1, n_dat=1, n_cit=1, num_classes=3), 4, 6),
        (HeadConfig(C=8, n_dp=2, n_dat=2, n_cit=2, num_classes=3), 6, 4),
        (HeadConfig(C=8, n_dp=1, n_dat=2, n_cit=2, num_classes=3,
                    stripe_width=2), 4, 4),
        (HeadConfig(C=8, n_dp=1, n_dat=1, n_cit=1, num_classes=3,
                    ffn_enabled=True), 4, 4),
        (HeadConfig(C=16, n_dp=1, n_dat=2, n_cit=2, num_classes=2,
                    num_anchors=2), 4, 4),
    ])
    def test_symbolic_equals_instrumented(self, cfg, H, W):
        dyn = dynamic_counts(cfg, H, W)
        sym = profiler.count(cfg, H, W)
        sym_macs = sym.macs_by_name()
        for path in set(dyn.macs) | set(sym_macs):
            assert dyn.macs.get(path, 0) == sym_macs.get(path, 0), path
        assert dyn.non_mac == sym.non_mac_ops

    def test_zero_block_head(self):
        cfg = HeadConfig(C=8, n_dp=0, n_dat=0, n_cit=0, num_classes=3)
        dyn = dynamic_counts(cfg, 4, 4)
        sym = profiler.count(cfg, 4, 4)
        assert dyn.macs == {k: v for k, v in sym.macs_by_name().items() if v}


class TestClosedForms:
    def test_eq4_row_at_default_scale(self):
        head, _ = build_head(HeadConfig())
        report = profiler.count(head, 8, 8)
        macs = report.macs_by_name()
        assert macs["dat0/eda/proj"] + macs["dat0/eda/attn"] == 73_728
        check = next(c for c in report.closed_form_checks
                     if c.formula_name == "eda_macs[dat0]")
        assert check.expected == 73_728 and check.match

    @pytest.mark.parametrize("C,expected", [(4, 56), (8, 224), (16, 896),
                                            (64, 14_336), (256, 229_376)])
    def test_projection_parameter_law(self, C, expected):
        report = profiler.count(HeadConfig(C=C, n_dat=1), 2, 2)
        entry = next(e for e in report.entries if e.name == "dat0/eda/proj")
        assert entry.params == expected == 7 * C * C // 2

    def test_parameter_law_measured_from_real_arrays(self):
        head, _ = build_head(HeadConfig(C=16, num_classes=3))
        report = profiler.count(head, 4, 4)
        check = next(c for c in report.closed_form_checks
                     if c.formula_name.startswith("eda_param_law"))
        assert check.expected == 896 and check.match

    def test_cca_rows_double_with_height(self):
        cfg = HeadConfig(C=8, num_classes=3)
        a = profiler.count(cfg, 4, 6).macs_by_name()
        b = profiler.count(cfg, 8, 6).macs_by_name()
        for name in a:
            if "cca" in name:
                assert b[name] == 2 * a[name]

    def test_all_checks_pass_and_exposed(self):
        head, _ = build_head(HeadConfig(C=8, num_classes=3))
        report = profiler.count(head, 4, 4)
        assert report.all_checks_pass()
        names = [c.formula_name for c in report.closed_form_checks]
        assert any(n.startswith("eda_macs") for n in names)
        assert any(n.startswith("cca_flops") for n in names)
        assert "param_total_vs_enumeration" in names


class TestMonotonicity:
    def test_cost_strictly_increases_along_stacking(self):
        reports = [profiler.count(
            HeadConfig(C=16, n_dp=1, n_dat=n, n_cit=n), 8, 8)
            for n in (1, 2, 3, 4)]
        macs = [r.total_macs for r in reports]
        params = [r.total_params for r in reports]
        assert all(b > a for a, b in zip(macs, macs[1:]))
        assert all(b > a for a, b in zip(params, params[1:]))

    def test_each_knob_increases_cost(self):
        base = profiler.count(HeadConfig(C=16), 8, 8)
        more_dat = profiler.count(HeadConfig(C=16, n_dat=3), 8, 8)
        more_cit = profiler.count(HeadConfig(C=16, n_cit=3), 8, 8)
        assert more_dat.total_macs > base.total_macs
        assert more_dat.total_params > base.total_params
        assert more_cit.total_macs > base.total_macs
        assert more_cit.total_params > base.total_params


class TestParallelBaseline:
    def test_tower_conv_params(self):
        rep = profiler.parallel_head_baseline(C=16, n_convs=4, A=1, num_classes=3)
        conv_entries = [e for e in rep.entries if "tower/conv" in e.name]
        assert len(conv_entries) == 8
        assert all(e.params == 9 * 16 * 16 + 16 for e in conv_entries)

    def test_extra_conv_adds_fixed_params(self):
        C = 16
        p4 = profiler.parallel_head_baseline(C, n_convs=4).total_params
        p5 = profiler.parallel_head_baseline(C, n_convs=5).total_params
        assert p5 - p4 == 2 * (9 * C * C + C)

    def test_side_by_side_report(self):
        C = 16
        ours = profiler.count(HeadConfig(C=C, num_classes=80), 8, 8)
        base = profiler.parallel_head_baseline(C, n_convs=4, A=1,
                                               num_classes=80, H=8, W=8)
        assert ours.total_macs > 0 and base.total_macs > 0
        assert ours.total_params != base.total_params

    def test_rejects_zero_convs(self):
        with pytest.raises(ValueError):
            profiler.parallel_head_baseline(8, n_convs=0)


class TestReportSurface:
    def test_json_schema_stable(self):
        report = profiler.count(HeadConfig(C=8, num_classes=3), 4, 4)
        doc = json.loads(report.to_json())
        assert set(doc) == {"entries", "totals", "closed_form_checks",
                            "non_mac_ops", "flops_convention"}
        assert set(doc["totals"]) == {"macs", "params", "flops_2x_macs"}
        assert doc["totals"]["flops_2x_macs"] == 2 * doc["totals"]["macs"]
        assert doc["flops_convention"] == "1 MAC = 1 FLOP"
        assert all(set(e) == {"name", "macs", "params"} for e in doc["entries"])

    def test_totals_are_sums(self):
        report = profiler.count(HeadConfig(C=8, num_classes=3), 4, 4)
        assert report.total_macs == sum(e.macs for e in report.entries)
        assert report.total_params == sum(e.params for e in report.entries)

    def test_table_renders(self):
        text = profiler.count(HeadConfig(C=8, num_classes=3), 4, 4).table()
        assert "total" in text and "check" in text and "non-MAC" in text

    def test_divisibility_error_propagates(self):
        with pytest.raises(ConfigError):
            profiler.count(HeadConfig(C=8, stripe_width=3), 8, 8)
