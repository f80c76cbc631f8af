import numpy as np

from balm import SynthConfig, synth_generate
from balm.acquisition import AcquisitionKind
from balm.loop import ALConfig, CANONICAL_KINDS, eta_sweep


def tiny_sweep(tmp_path, etas=(0.0, 0.5, 1.0), seeds=(1, 2)):
    ds = synth_generate(SynthConfig(n_windows=80, length=16, seed=30))
    data, test = ds.windows[:60], ds.windows[60:]
    config = ALConfig(
        eta=0.0, n_passes=3, windows_per_iteration=16,
        epochs_per_iteration=1, pretrain_epochs=1,
    )
    return eta_sweep(data, test, list(CANONICAL_KINDS), list(etas), list(seeds), config)


def test_header_and_row_format(tmp_path):
    report = tiny_sweep(tmp_path)
    mean_path, std_path = report.to_csv(tmp_path / "sweep.csv")
    lines = mean_path.read_text().strip().splitlines()
    assert lines[0] == "eta,max_entropy,bald,variation_ratios,random"
    assert len(lines) == 4
    assert lines[1].startswith("0.0,")
    assert lines[3].startswith("1.0,")
    for line in lines[1:]:
        cells = line.split(",")
        assert all("." in c and len(c.split(".")[1]) >= 1 for c in cells)
    std_lines = std_path.read_text().strip().splitlines()
    assert std_lines[0] == lines[0]
    assert std_path.name == "sweep.stddev.csv"


def test_eta_zero_row_is_constant_across_kinds(tmp_path):
    report = tiny_sweep(tmp_path)
    baseline_by_kind = {k: report.cells[(0.0, k)] for k in CANONICAL_KINDS}
    reference = baseline_by_kind[AcquisitionKind.MAX_ENTROPY]
    for values in baseline_by_kind.values():
        assert values == reference


def test_eta_one_acquires_whole_pool_for_every_kind(tmp_path):
    # eta_sweep raises internally if any kind misses part of the pool
    report = tiny_sweep(tmp_path, etas=(0.0, 1.0), seeds=(3,))
    for kind in CANONICAL_KINDS:
        assert len(report.cells[(1.0, kind)]) == 1


def test_mean_and_stddev_accessors(tmp_path):
    report = tiny_sweep(tmp_path, etas=(0.0,), seeds=(1, 2, 3))
    values = report.cells[(0.0, AcquisitionKind.BALD)]
    assert report.mean(0.0, AcquisitionKind.BALD) == np.mean(values)
    assert report.stddev(0.0, AcquisitionKind.BALD) == np.std(values)
