import pytest

from app.repositories.fixture_repository import fixture_repository
from app.schemas.budget import BudgetInput
from app.services.link_budget import (
    budget_report,
    budget_table,
    effective_aperture,
    format_budget,
    range_reduction_factor,
    reduced_max_range,
    total_clip_on_loss,
)


@pytest.fixture
def boxed_input():
    return BudgetInput(per_state_ripple_db=fixture_repository.ripple_values("ripple_m64"))


def test_losses_add_in_db():
    assert total_clip_on_loss(4.0, 1.0, 2.0, 1.0) == 8.0


def test_range_factor_of_boxed_penalty():
    assert range_reduction_factor(8.0) == pytest.approx(1.5849, abs=1e-4)
    assert reduced_max_range(5.0, 8.0) == pytest.approx(3.155, abs=5e-3)


def test_range_factor_composes_multiplicatively():
    for a, b in [(0.0, 0.0), (1.5, 6.5), (3.0, 12.25), (0.1, 40.0)]:
        assert range_reduction_factor(a + b) == pytest.approx(
            range_reduction_factor(a) * range_reduction_factor(b), rel=1e-12
        )


def test_zero_loss_keeps_range():
    assert reduced_max_range(5.0, 0.0) == 5.0


def test_negative_loss_is_rejected():
    with pytest.raises(ValueError):
        range_reduction_factor(-1.0)


def test_effective_aperture_partitions_states():
    m_eff, below = effective_aperture([12.0, 10.0, 9.0, 15.0], 10.0)
    assert (m_eff, below) == (2, [1, 2])


def test_boxed_example_is_reproduced(boxed_input):
    report = budget_report(boxed_input)
    assert report.total_loss_db == pytest.approx(8.0)
    assert report.snr_at_reference_db == pytest.approx(12.0)
    assert report.range_reduction_factor == pytest.approx(1.5849, abs=1e-4)
    assert report.reduced_max_range_m == pytest.approx(3.155, abs=5e-3)
    assert report.m_eff == 44
    assert len(report.below_threshold_states) == 20


def test_flat_ripple_keeps_every_state():
    report = budget_report(BudgetInput())
    assert report.m_eff == 64
    assert report.per_state_snr_db == [12.0] * 64


def test_mismatched_ripple_length_is_rejected():
    with pytest.raises(ValueError, match="per-state ripple"):
        BudgetInput(num_states=4, per_state_ripple_db=[0.0, 0.0])


def test_budget_table_text(boxed_input):
    rows = budget_table(boxed_input, budget_report(boxed_input))
    text = format_budget(rows)
    assert "total penalty" in text and "8.0000 dB" in text
    assert "SNR at 3 m" in text and "12.0000 dB" in text
    assert "1.5849 x" in text
    assert text.splitlines()[-1].split() == ["M_eff", "44"]
