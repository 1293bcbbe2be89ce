"""Two-photon state algebra: construction, evolution, detection rules."""

import math

import numpy as np
import pytest

from biphoton.errors import (
    ConfigurationError,
    DegenerateStateError,
    EmptyPostselectionError,
    ModelError,
)
from biphoton.quantum import (
    Mode,
    ModeBasis,
    ModeUnitary,
    TwoPhotonState,
    apply_unitary,
    channel_pair_distribution,
    make_pair_state,
    marginal_click_pattern,
    outcome_distribution,
    pair_norm,
    postselect,
    superpose,
)
from oracles import (
    brute_apply,
    brute_outcome_probabilities,
    random_unitary,
    symmetric_overlap,
)

TWO_PATHS = ModeBasis.from_paths(["a", "b"])
AH, AV = Mode("a", "H"), Mode("a", "V")
BH, BV = Mode("b", "H"), Mode("b", "V")


def _unitary(basis: ModeBasis, matrix: np.ndarray) -> ModeUnitary:
    return ModeUnitary(basis, matrix)


def _splitter() -> ModeUnitary:
    """Balanced splitter a->(a, b) with +i (H) / -i (V) reflection phases."""
    rt2 = 1.0 / math.sqrt(2.0)
    u = np.eye(4, dtype=complex)
    for pol, phase in (("H", 1j), ("V", -1j)):
        src = TWO_PATHS.index(Mode("a", pol))
        dst = TWO_PATHS.index(Mode("b", pol))
        u[:, [src, dst]] = 0.0
        u[src, src] = rt2
        u[dst, src] = phase * rt2
        u[src, dst] = rt2
        u[dst, dst] = -phase * rt2
    return ModeUnitary(TWO_PATHS, u)


# ---------------------------------------------------------------------------
# modes and bases


def test_mode_rejects_unknown_polarization():
    with pytest.raises(ConfigurationError):
        Mode("a", "D")


def test_basis_orders_both_polarizations_per_path():
    assert TWO_PATHS.modes == (AH, AV, BH, BV)
    assert TWO_PATHS.paths == ("a", "b")
    assert TWO_PATHS.index(BH) == 2


def test_basis_rejects_duplicates_and_empty():
    with pytest.raises(ConfigurationError):
        ModeBasis([AH, AH])
    with pytest.raises(ConfigurationError):
        ModeBasis([])


def test_basis_rejects_foreign_mode_lookup():
    with pytest.raises(ConfigurationError):
        TWO_PATHS.index(Mode("c", "H"))


# ---------------------------------------------------------------------------
# state construction


def test_pair_state_distinct_modes_splits_amplitude():
    state = make_pair_state(TWO_PATHS, AH, AV)
    a = state.amplitudes
    assert a[0, 1] == a[1, 0] == 0.5
    assert state.norm == pytest.approx(1.0, abs=1e-12)


def test_pair_state_double_occupancy_normalizes():
    state = make_pair_state(TWO_PATHS, AH, AH)
    assert state.amplitudes[0, 0] == pytest.approx(1.0 / math.sqrt(2.0))
    assert state.norm == pytest.approx(1.0, abs=1e-12)


def test_pair_state_labeled_is_one_ordered_entry():
    state = make_pair_state(TWO_PATHS, AH, AV, labeled=True)
    assert state.amplitudes[0, 1] == 1.0
    assert state.amplitudes[1, 0] == 0.0
    assert state.norm == pytest.approx(1.0, abs=1e-12)


def test_pair_state_unknown_mode_rejected():
    with pytest.raises(ConfigurationError):
        make_pair_state(TWO_PATHS, Mode("c", "H"), AV)


def test_identical_photon_state_must_be_symmetric():
    a = np.zeros((4, 4), dtype=complex)
    a[0, 1] = 1.0
    with pytest.raises(ModelError):
        TwoPhotonState(TWO_PATHS, a, labeled=False)


def test_zero_norm_state_rejected():
    with pytest.raises(DegenerateStateError):
        TwoPhotonState(TWO_PATHS, np.zeros((4, 4), dtype=complex))


def test_pair_norm_counts_double_occupancy_twice():
    a = np.zeros((2, 2), dtype=complex)
    a[0, 0] = 1.0
    assert pair_norm(a, labeled=False) == pytest.approx(2.0)
    assert pair_norm(a, labeled=True) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# superposition


def test_superpose_identity():
    state = make_pair_state(TWO_PATHS, AH, BV)
    same = superpose([(1.0, state)])
    assert np.allclose(same.amplitudes, state.amplitudes)


def test_superpose_antisymmetric_combination():
    hv = make_pair_state(TWO_PATHS, AH, BV, labeled=True)
    vh = make_pair_state(TWO_PATHS, AV, BH, labeled=True)
    state = superpose([(0.5, hv), (0.5 * np.exp(1j * math.pi), vh)])
    rt2 = 1.0 / math.sqrt(2.0)
    assert state.amplitudes[0, 3] == pytest.approx(rt2)
    assert state.amplitudes[1, 2] == pytest.approx(-rt2)


def test_superpose_rejects_mixed_labels():
    plain = make_pair_state(TWO_PATHS, AH, BV)
    tagged = make_pair_state(TWO_PATHS, AH, BV, labeled=True)
    with pytest.raises(ModelError):
        superpose([(1.0, plain), (1.0, tagged)])


def test_superpose_rejects_zero_vector():
    state = make_pair_state(TWO_PATHS, AH, BV)
    with pytest.raises(DegenerateStateError):
        superpose([(1.0, state), (-1.0, state)])


def test_superpose_rejects_empty_and_mismatched_bases():
    with pytest.raises(ModelError):
        superpose([])
    other = ModeBasis.from_paths(["a", "c"])
    with pytest.raises(ModelError):
        superpose(
            [
                (1.0, make_pair_state(TWO_PATHS, AH, AV)),
                (1.0, make_pair_state(other, Mode("a", "H"), Mode("a", "V"))),
            ]
        )


# ---------------------------------------------------------------------------
# unitaries and evolution


def test_unitary_shape_and_unitarity_enforced():
    with pytest.raises(ConfigurationError):
        ModeUnitary(TWO_PATHS, np.eye(3))
    nearly = np.eye(4, dtype=complex)
    nearly[0, 0] = 1.0 + 1e-6
    with pytest.raises(ConfigurationError):
        ModeUnitary(TWO_PATHS, nearly)


def test_unitary_composition_requires_same_basis():
    other = ModeBasis.from_paths(["a", "c"])
    with pytest.raises(ConfigurationError):
        _unitary(TWO_PATHS, np.eye(4)) @ _unitary(other, np.eye(4))


def test_identity_evolution_is_identity():
    state = make_pair_state(TWO_PATHS, AH, AV)
    out = apply_unitary(state, _unitary(TWO_PATHS, np.eye(4)))
    assert np.allclose(out.amplitudes, state.amplitudes)


def test_evolution_requires_matching_basis():
    other = ModeBasis.from_paths(["a", "c"])
    state = make_pair_state(TWO_PATHS, AH, AV)
    with pytest.raises(ConfigurationError):
        apply_unitary(state, _unitary(other, np.eye(4)))


def test_evolution_matches_ordered_pair_expansion():
    rng = np.random.default_rng(7)
    for _ in range(50):
        u = random_unitary(rng, 4)
        raw = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        for labeled, amps in ((True, raw), (False, raw + raw.T)):
            amps = amps / math.sqrt(pair_norm(amps, labeled))
            state = TwoPhotonState(TWO_PATHS, amps, labeled)
            out = apply_unitary(state, _unitary(TWO_PATHS, u))
            assert np.abs(out.amplitudes - brute_apply(amps, u)).max() < 1e-12


def test_evolution_preserves_symmetry_and_norm():
    rng = np.random.default_rng(11)
    state = make_pair_state(TWO_PATHS, AH, AV)
    for _ in range(1000):
        u = _unitary(TWO_PATHS, random_unitary(rng, 4))
        evolved = apply_unitary(state, u)
        asym = np.abs(evolved.amplitudes - evolved.amplitudes.T).max()
        assert asym <= 1e-12
        assert abs(evolved.norm - 1.0) <= 1e-12


# ---------------------------------------------------------------------------
# detection rules


def test_pair_through_splitter_has_quarter_coefficients():
    """One H + one V photon in path a, through the balanced splitter."""
    state = apply_unitary(make_pair_state(TWO_PATHS, AH, AV), _splitter())
    a = state.amplitudes
    ah, av, bh, bv = 0, 1, 2, 3
    assert a[ah, av] == pytest.approx(0.25)
    assert a[ah, bv] == pytest.approx(-0.25j)
    assert a[bh, av] == pytest.approx(0.25j)
    assert a[bh, bv] == pytest.approx(0.25)
    dist = outcome_distribution(state)
    assert dist.probability(AH, AV) == pytest.approx(0.25, abs=1e-12)
    assert dist.probability(BH, BV) == pytest.approx(0.25, abs=1e-12)
    assert dist.probability(AH, BV) + dist.probability(AV, BH) == pytest.approx(
        0.5, abs=1e-12
    )


def test_outcome_rules_match_brute_force_on_random_states():
    rng = np.random.default_rng(23)
    for _ in range(60):
        n = int(rng.integers(2, 7))
        basis = ModeBasis(Mode(f"p{k}", pol) for k in range(n) for pol in ("H",))
        raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        for labeled, amps in ((True, raw), (False, raw + raw.T)):
            amps = amps / math.sqrt(pair_norm(amps, labeled))
            dist = outcome_distribution(TwoPhotonState(basis, amps, labeled))
            expected = brute_outcome_probabilities(amps, labeled)
            got = {
                (basis.index(m1), basis.index(m2)): p for (m1, m2), p in dist.items()
            }
            assert set(got) == set(expected)
            for key, p in expected.items():
                assert got[key] == pytest.approx(p, abs=1e-12)


def test_outcome_probabilities_sum_to_one():
    rng = np.random.default_rng(31)
    for _ in range(40):
        raw = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        amps = (raw + raw.T) / math.sqrt(pair_norm(raw + raw.T, False))
        dist = outcome_distribution(TwoPhotonState(TWO_PATHS, amps))
        assert sum(p for _, p in dist.items()) == pytest.approx(1.0, abs=1e-12)


def _rotated_pair(angle_rad: float, labeled: bool) -> TwoPhotonState:
    """H+V pair in one path, both photons polarization-rotated by ``angle``."""
    basis = ModeBasis.from_paths(["a"])
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    u = np.array([[c, -s], [s, c]], dtype=complex)
    state = make_pair_state(basis, Mode("a", "H"), Mode("a", "V"), labeled=labeled)
    return apply_unitary(state, ModeUnitary(basis, u))


@pytest.mark.parametrize("steps", range(0, 24))
def test_amplitude_vs_probability_sum_rules(steps):
    """Rotating both photons of an H+V pair by phi: the one-H-one-V outcome
    keeps probability cos^2(2 phi) when amplitudes add, but
    (1 + cos^2(2 phi))/2 when the photons are distinguishable in principle.
    """
    phi = steps * math.pi / 24.0
    h, v = Mode("a", "H"), Mode("a", "V")
    split = outcome_distribution(_rotated_pair(phi, labeled=False)).probability(h, v)
    assert split == pytest.approx(math.cos(2.0 * phi) ** 2, abs=1e-12)
    tagged = outcome_distribution(_rotated_pair(phi, labeled=True)).probability(h, v)
    assert tagged == pytest.approx(0.5 * (1.0 + math.cos(2.0 * phi) ** 2), abs=1e-12)


def test_zero_rotation_both_rules_agree():
    for labeled in (False, True):
        dist = outcome_distribution(_rotated_pair(0.0, labeled=labeled))
        assert dist.probability(Mode("a", "H"), Mode("a", "V")) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# channel folding


def test_channel_pair_distribution_keeps_photon_count():
    state = apply_unitary(make_pair_state(TWO_PATHS, AH, AV), _splitter())
    cmap = {AH: 0, AV: 0, BH: 1, BV: 1}
    pairs = channel_pair_distribution(outcome_distribution(state), cmap)
    assert pairs[(0, 0)] == pytest.approx(0.25, abs=1e-12)
    assert pairs[(0, 1)] == pytest.approx(0.5, abs=1e-12)
    assert pairs[(1, 1)] == pytest.approx(0.25, abs=1e-12)


def test_click_pattern_folds_double_occupancy_to_one_click():
    state = make_pair_state(TWO_PATHS, AH, AH)
    patterns = marginal_click_pattern(
        outcome_distribution(state), {AH: 0, AV: 0, BH: 1, BV: 1}
    )
    assert patterns == {frozenset({0}): pytest.approx(1.0)}


def test_click_patterns_sum_to_one():
    rng = np.random.default_rng(5)
    cmap = {AH: 0, AV: 1, BH: 2, BV: 2}
    for _ in range(25):
        raw = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        amps = (raw + raw.T) / math.sqrt(pair_norm(raw + raw.T, False))
        dist = outcome_distribution(TwoPhotonState(TWO_PATHS, amps))
        patterns = marginal_click_pattern(dist, cmap)
        assert sum(patterns.values()) == pytest.approx(1.0, abs=1e-12)


def test_unmapped_mode_with_weight_is_rejected():
    dist = outcome_distribution(make_pair_state(TWO_PATHS, AH, BV))
    with pytest.raises(ConfigurationError):
        channel_pair_distribution(dist, {AH: 0})


# ---------------------------------------------------------------------------
# postselection


def test_postselect_split_outcomes_yields_anticorrelated_state():
    state = apply_unitary(make_pair_state(TWO_PATHS, AH, AV), _splitter())
    kept, prob = postselect(state, lambda m1, m2: m1.path != m2.path)
    assert prob == pytest.approx(0.5, abs=1e-12)
    a = kept.amplitudes
    mag = 1.0 / (2.0 * math.sqrt(2.0))
    assert a[0, 3] == pytest.approx(-1j * mag, abs=1e-12)
    assert a[1, 2] == pytest.approx(+1j * mag, abs=1e-12)
    # equal to the ideal anticorrelated two-path state up to a global phase
    target = superpose(
        [
            (1.0, make_pair_state(TWO_PATHS, AH, BV)),
            (-1.0, make_pair_state(TWO_PATHS, AV, BH)),
        ]
    )
    fidelity = abs(symmetric_overlap(target.amplitudes, a)) ** 2
    assert fidelity >= 1.0 - 1e-12


def test_postselect_keep_everything_is_identity():
    state = apply_unitary(make_pair_state(TWO_PATHS, AH, AV), _splitter())
    kept, prob = postselect(state, lambda m1, m2: True)
    assert prob == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(kept.amplitudes, state.amplitudes, atol=1e-12)


def test_postselect_single_path_keeps_quarter_weight():
    state = apply_unitary(make_pair_state(TWO_PATHS, AH, AV), _splitter())
    kept, prob = postselect(state, lambda m1, m2: m1.path == m2.path == "a")
    assert prob == pytest.approx(0.25, abs=1e-12)
    dist = outcome_distribution(kept)
    assert dist.probability(AH, AV) == pytest.approx(1.0, abs=1e-12)


def test_postselect_empty_selection_rejected():
    state = make_pair_state(TWO_PATHS, AH, AV)
    with pytest.raises(EmptyPostselectionError):
        postselect(state, lambda m1, m2: m1.path == "b")
