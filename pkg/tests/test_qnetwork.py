"""Graph network + quantile head: shapes, symmetries, checkpoints."""
import numpy as np
import pytest

from jobshopls import generate_instance
from jobshopls.env import ActionSpace, Observation, reset
from jobshopls.nn import (GNNConfig, QNetwork, autodiff as ad, encode, gnn_layer,
                          greedy_action, load_checkpoint, policy_probs, q_values,
                          save_checkpoint)

TINY = GNNConfig(d_emb=8, mlp_hidden=8, iqn_hidden=16, n_tau_features=8)


def small_obs(seed=0, j=3, m=3):
    inst = generate_instance(j, m, seed=seed)
    _, obs = reset(inst, ActionSpace.ANP, seed=0, t_max=5)
    return obs


def test_config_validation():
    with pytest.raises(ValueError):
        GNNConfig(d_emb=0)
    assert GNNConfig().n_layers == 6
    sched = GNNConfig().layer_schedule
    assert sched == ("stat", "stat", "stat", "dyna", "dyna", "stat")


def test_output_shapes_and_determinism():
    obs = small_obs()
    net = QNetwork(10, TINY, seed=5)
    net2 = QNetwork(10, TINY, seed=5)
    taus = np.array([0.1, 0.5, 0.9])
    z, q = q_values(obs, net, taus)
    z2, q2 = q_values(obs, net2, taus)
    assert z.data.shape == (3, 10)
    assert q.data.shape == (10,)
    assert np.array_equal(z.data, z2.data)
    assert np.allclose(q.data, z.data.mean(axis=0))


def test_single_tau_mean_is_identity():
    obs = small_obs(1)
    net = QNetwork(10, TINY, seed=6)
    z, q = q_values(obs, net, np.array([0.5]))
    assert np.allclose(q.data, z.data[0])


def test_greedy_action_matches_argmax_of_q():
    obs = small_obs(8)
    net = QNetwork(10, TINY, seed=21)
    taus = np.array([0.2, 0.5, 0.8])
    _, q = q_values(obs, net, taus)
    assert greedy_action(obs, net, taus) == int(np.argmax(q.data))


def test_policy_probs_is_a_distribution():
    obs = small_obs(2)
    net = QNetwork(10, TINY, seed=7)
    _, q = q_values(obs, net, np.array([0.25, 0.75]))
    p = policy_probs(q.data)
    assert p.shape == (10,)
    assert np.all(p > 0) and abs(p.sum() - 1.0) < 1e-12


def test_node_permutation_equivariance():
    obs = small_obs(3)
    net = QNetwork(10, TINY, seed=8)
    taus = np.array([0.3, 0.6])
    _, q = q_values(obs, net, taus)

    n = obs.node_feats.shape[0]
    perm = np.random.default_rng(4).permutation(n)  # new_i holds old perm[i]
    inv = np.empty(n, dtype=int)
    inv[perm] = np.arange(n)
    shuffled = Observation(
        scalars=obs.scalars,
        node_feats=obs.node_feats[perm],
        e_stat=inv[obs.e_stat], w_stat=obs.w_stat,
        e_dyna=inv[obs.e_dyna], w_dyna=obs.w_dyna,
        groups=obs.groups[perm], n_groups=obs.n_groups)
    _, q_shuffled = q_values(shuffled, net, taus)
    assert np.allclose(q.data, q_shuffled.data, atol=1e-10)


def test_zeroed_message_layer_reduces_to_layer_norm():
    obs = small_obs(4)
    net = QNetwork(10, TINY, seed=9)
    for name in ("gnn0.m1.w2", "gnn0.m1.b2", "gnn0.m2.w2", "gnn0.m2.b2"):
        net.params[name].data[...] = 0.0
    h = ad.constant(np.random.default_rng(5).standard_normal(
        (obs.node_feats.shape[0], TINY.d_emb)))
    out = gnn_layer(h, obs.e_stat, obs.w_stat, net, 0)
    want = ad.layer_norm(h, net.params["gnn0.ln.scale"],
                         net.params["gnn0.ln.shift"]).data
    assert np.allclose(out.data, want, atol=1e-12)


def test_single_operation_instance_has_no_edges():
    obs = small_obs(5, j=1, m=1)
    assert obs.e_stat.shape[1] == 0 and obs.e_dyna.shape[1] == 0
    net = QNetwork(10, TINY, seed=10)
    _, q = q_values(obs, net, np.array([0.5]))
    assert np.all(np.isfinite(q.data))


def test_group_pooling_ignores_order_within_groups():
    obs = small_obs(6, j=4, m=3)
    net = QNetwork(10, TINY, seed=11)
    nodes, grp, feat = encode(obs, net)
    # permute whole observation; grouped statistics must be preserved
    n = obs.node_feats.shape[0]
    perm = np.roll(np.arange(n), 5)
    inv = np.empty(n, dtype=int)
    inv[perm] = np.arange(n)
    obs2 = Observation(scalars=obs.scalars, node_feats=obs.node_feats[perm],
                       e_stat=inv[obs.e_stat], w_stat=obs.w_stat,
                       e_dyna=inv[obs.e_dyna], w_dyna=obs.w_dyna,
                       groups=obs.groups[perm], n_groups=obs.n_groups)
    _, grp2, _ = encode(obs2, net)
    assert np.allclose(np.sort(grp.data, axis=0), np.sort(grp2.data, axis=0),
                       atol=1e-10)


def test_unequal_group_sizes_supported():
    rng = np.random.default_rng(12)
    n = 5
    obs = Observation(
        scalars=rng.random(7), node_feats=rng.random((n, 5)),
        e_stat=np.array([[0, 1], [1, 2]]), w_stat=np.ones(2),
        e_dyna=np.zeros((2, 0), dtype=int), w_dyna=np.zeros(0),
        groups=np.array([0, 0, 0, 1, 1]), n_groups=2)
    net = QNetwork(4, TINY, seed=13)
    _, q = q_values(obs, net, np.array([0.2, 0.8]))
    assert q.data.shape == (4,) and np.all(np.isfinite(q.data))


def test_empty_group_is_rejected():
    rng = np.random.default_rng(14)
    obs = Observation(
        scalars=rng.random(7), node_feats=rng.random((3, 5)),
        e_stat=np.zeros((2, 0), dtype=int), w_stat=np.zeros(0),
        e_dyna=np.zeros((2, 0), dtype=int), w_dyna=np.zeros(0),
        groups=np.array([0, 0, 2]), n_groups=3)
    net = QNetwork(4, TINY, seed=15)
    with pytest.raises(ValueError):
        encode(obs, net)


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    net = QNetwork(8, TINY, seed=16)
    p = tmp_path / "net.npz"
    save_checkpoint(net, p)
    again = load_checkpoint(p)
    assert again.n_actions == 8
    assert set(again.params) == set(net.params)
    for name, t in net.params.items():
        assert np.array_equal(t.data, again.params[name].data), name
        assert t.data.dtype == again.params[name].data.dtype


def test_checkpoint_rejects_missing_parameters(tmp_path):
    net = QNetwork(8, TINY, seed=17)
    p = tmp_path / "net.npz"
    save_checkpoint(net, p)
    data = dict(np.load(p, allow_pickle=False))
    removed = [k for k in data if k.endswith("dec.w2")][0]
    del data[removed]
    np.savez(tmp_path / "broken.npz", **data)
    with pytest.raises((KeyError, ValueError)):
        load_checkpoint(tmp_path / "broken.npz")


def test_parameter_count_scales_with_width():
    small = QNetwork(4, TINY, seed=0).n_parameters()
    large = QNetwork(4, GNNConfig(d_emb=16, mlp_hidden=16, iqn_hidden=32,
                                  n_tau_features=8), seed=0).n_parameters()
    assert large > small > 0
