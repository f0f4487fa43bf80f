"""Smoke test for the Python bindings.

Build and install first:
    maturin develop -m crates/python/Cargo.toml
"""

import json
import tempfile

import templeak


def main():
    x = templeak.synth("white", 2.0, 100.0, 3, seed=1)
    assert len(x) == 3 and len(x[0]) == 200

    cfg = templeak.RunConfig.preset("table1").overlay(json.dumps({
        "templates": ["kul_like"],
        "tasks": ["dlc", "tlc_eeg", "tlc_eeg_wodo"],
        "subjects": 1,
        "seeds": [0, 1],
        "source": {"type": "surrogate", "kind": {"type": "white"}, "channels": 2},
        "train": {"max_epochs": 1},
        "cnn": {"conv_filters": 4, "hidden_units": 4},
    }))
    cfg.validate()
    report = templeak.run_audit(cfg)
    acc, sem, chance = report.summary("dlc", "kul_like", "leave_samples_out")
    assert chance == 12.5 and 0.0 <= acc <= 100.0, (acc, sem, chance)
    again = templeak.AuditReport.from_json(report.to_json())
    merged = templeak.AuditReport.merge([report, again])
    assert "DLC" in merged.render()
    with tempfile.TemporaryDirectory() as d:
        assert "table1.csv" in report.write(d)

    adj, rej = templeak.bh_fdr([0.001, 0.02, 0.5], 0.05)
    assert rej == [True, True, False], (adj, rej)
    assert templeak.bonferroni([0.01, 0.5]) == [0.02, 1.0]
    assert templeak.rank_accuracy_pct([[0.9, 0.1], [0.2, 0.8]], [0, 1]) == 100.0
    assert templeak.top_k_pct([[0.9, 0.1], [0.2, 0.8]], [1, 1], 1) == 50.0

    recs = [templeak.synth("white", 40.0, 200.0, 1, seed=s) for s in range(2)]
    lrtc_cfg = {
        "wavelet": {"freqs": [5.0, 10.0], "n_cycles": 7.0, "lags_s": [0.5, 1.0, 2.0], "analysis_fs": 200.0},
        "n_segments": 2,
    }
    m = templeak.lrtc(recs, 200.0, json.dumps(lrtc_cfg))
    assert len(m["values"]) == 2 and len(m["values"][0]) == 3 and m["n_units"] == 2

    try:
        templeak.RunConfig.preset("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown preset accepted")
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
