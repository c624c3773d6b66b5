import numpy as np
import pytest
from hypothesis import given, strategies as st

from actionrd.errors import SizeLimitExceeded
from actionrd.scenario import ScenarioInstance, build_erasure
from actionrd.strategy import ShannonStrategy, enumerate_strategies, support_report


@pytest.mark.parametrize("sizes,count", [((2, 1, 2), 4), ((2, 2, 2), 8), ((5, 6, 2), 31250)])
def test_strategy_counts(sizes, count):
    assert len(enumerate_strategies(*sizes)) == count


def test_apply_and_action():
    s = ShannonStrategy((1, 0, 2), 1)
    assert [s.apply(y) for y in range(3)] == [1, 0, 2]
    assert s.action_of() == 1
    space = enumerate_strategies(3, 3, 2)
    t = space.index(s)
    assert space[t] == s
    assert space.apply(t, 2) == 2 and space.action_of(t) == 1


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_blocks_partition_the_space(nxhat, ny, na):
    space = enumerate_strategies(nxhat, ny, na)
    seen = np.concatenate([space.members(a) for a in range(na)])
    assert np.array_equal(np.sort(seen), np.arange(len(space)))
    for a in range(na):
        assert np.all(space.actions[space.blocks[a]] == a)
        assert len(space.members(a)) == nxhat ** ny
    # no duplicates
    rows = {(int(space.actions[t]), tuple(space.recon[t])) for t in range(len(space))}
    assert len(rows) == len(space)


def test_enumeration_is_deterministic():
    a, b = enumerate_strategies(3, 2, 2), enumerate_strategies(3, 2, 2)
    assert np.array_equal(a.recon, b.recon) and np.array_equal(a.actions, b.actions)


def test_pruning_pins_unreachable_outputs():
    sc = build_erasure(K=4, q=0.5, p=0.0)
    space = enumerate_strategies(sc.n_xhat, sc.n_y, sc.n_a, reachable=sc.reachable())
    # action 0 only ever sees the erasure, action 1 never does
    assert len(space.members(0)) == 5 and len(space.members(1)) == 5 ** 5
    blk0 = space.recon[space.blocks[0]]
    assert np.all(blk0[:, :5] == 0)
    assert np.all(space.recon[space.blocks[1]][:, 5] == 0)


def test_single_action_block_matches_restriction():
    sc = build_erasure(K=2, q=0.3, p=0.2)
    full = enumerate_strategies(sc.n_xhat, sc.n_y, sc.n_a, reachable=sc.reachable())
    for a in range(sc.n_a):
        sub = sc.restrict_action(a)
        part = enumerate_strategies(sub.n_xhat, sub.n_y, 1, reachable=sub.reachable())
        assert np.array_equal(part.recon, full.recon[full.blocks[a]])


def test_size_cap():
    with pytest.raises(SizeLimitExceeded):
        enumerate_strategies(5, 6, 2, cap=1000)


def test_support_report_warns(caplog):
    space = enumerate_strategies(2, 2, 2)
    assert support_report(space, np.full(8, 1 / 8), n_x=1) == 8
    assert "exceeds" in caplog.text


def test_recon_choices_on_noisy_erasure():
    sc = build_erasure(K=4, q=0.5, p=0.1)
    ch = sc.recon_choices()
    # only the erasure leaves a real choice; letter 5 is never penalized so it loses to letter 1
    assert ch[1][:5] == [(0,), (1,), (2,), (3,), (0,)]
    assert ch[0][5] == ch[1][5] == (0, 1, 2, 3)
    assert all(c == (0,) for c in ch[0][:5])


def test_recon_choices_keep_strict_tradeoffs():
    dist = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 0.5]])
    sc = ScenarioInstance([0.5, 0.5], np.ones((1, 2, 1)), dist, [0.0])
    assert sc.recon_choices() == [[(0, 1, 2)]]
    dist[:, 2] = 1.0
    sc = ScenarioInstance([0.5, 0.5], np.ones((1, 2, 1)), dist, [0.0])
    assert sc.recon_choices() == [[(0, 1)]]


def test_choices_enumeration_and_validation():
    space = enumerate_strategies(3, 2, 2, choices=[[(0, 2), (1,)], [(0,), (0, 1, 2)]])
    assert space.recon.tolist() == [[0, 1], [2, 1], [0, 0], [0, 1], [0, 2]]
    assert space.actions.tolist() == [0, 0, 1, 1, 1]
    with pytest.raises(ValueError):
        enumerate_strategies(3, 2, 1, choices=[[(0,), ()]])
    with pytest.raises(ValueError):
        enumerate_strategies(3, 2, 1, choices=[[(0,), (3,)]])
