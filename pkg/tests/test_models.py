import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penn.autodiff import DenseLayer, DimensionError, Tensor
from penn.errors import ParameterError, SchemaError
from penn.models import (
    FUSION_KINDS,
    FUSION_MODULES,
    INPUT_GROUPS,
    AttentionFusion,
    ChannelWeightedFusion,
    PennNetwork,
    PennSpec,
    RegressionHead,
    SubNetwork,
    count_params,
    partition_input,
    penn_forward,
    scale_model,
    scale_width,
)
from penn.networks import build_network

from oracles import gradient_check_case, gradient_errors, np_fusion, np_penn_forward


def _zero(module):
    for p in module.parameters():
        p.data[:] = 0.0


def _randomize(module, seed=0, scale=0.3):
    rng = np.random.default_rng(seed)
    for p in module.parameters():
        p.data[:] = rng.normal(0.0, scale, size=p.shape)


def _features(n, dim, seed, nonneg=True):
    x = np.random.default_rng(seed).normal(size=(n, dim))
    return np.abs(x) if nonneg else x


# input partition


def test_partition_groups():
    x = Tensor(np.arange(18.0))
    groups = partition_input(x)
    assert [g.shape[-1] for g in groups] == [3, 2, 11, 2]
    np.testing.assert_array_equal(groups[0].data, [0, 1, 2])
    np.testing.assert_array_equal(groups[2].data, np.arange(5.0, 16.0))


def test_partition_rejects_wrong_length():
    with pytest.raises(SchemaError):
        partition_input(Tensor(np.zeros(17)))


# sub-networks and heads


def test_subnetwork_output_width_and_sign():
    spec = PennSpec()
    sub = SubNetwork(11, spec, "hlcsn")
    _randomize(sub, scale=1.0)
    out = sub(Tensor(np.random.default_rng(0).normal(size=(50, 11)))).data
    assert out.shape == (50, 128)
    assert (out >= 0).all()


def test_subnetwork_zero_input_zero_bias():
    sub = SubNetwork(3, PennSpec(), "owcsn")
    _randomize(sub)
    for layer in sub.layers():
        layer.bias.data[:] = 0
    np.testing.assert_array_equal(sub(Tensor(np.zeros(3))).data, np.zeros(128))


def test_subnetwork_rejects_wrong_width():
    with pytest.raises(DimensionError):
        SubNetwork(3, PennSpec(), "owcsn")(Tensor(np.zeros(4)))


def test_head_zero_weights():
    head = RegressionHead(128, 32)
    np.testing.assert_array_equal(head(Tensor(np.ones(128))).data, [0.0])


# fusion modules


@pytest.mark.parametrize("kind", ["fcf", "bnf"])
def test_concat_fusions_zero_weights(kind):
    fusion = FUSION_MODULES[kind](PennSpec(), "f")
    out = fusion(Tensor(np.ones(128)), Tensor(np.ones(128)))
    np.testing.assert_array_equal(out.data, np.zeros(128))


@pytest.mark.parametrize("kind", FUSION_KINDS)
@pytest.mark.parametrize("width", [0.25, 0.5, 1.0, 2.0])
def test_fusion_dimensional_consistency(kind, width):
    spec = PennSpec(fusion=kind, width_multiplier=width)
    fusion = FUSION_MODULES[kind](spec, "f")
    _randomize(fusion)
    d = spec.feature_dim
    out = fusion(Tensor(_features(3, d, 1)), Tensor(_features(3, d, 2)))
    assert out.shape == (3, d)


@pytest.mark.parametrize("kind", FUSION_KINDS)
def test_fusion_rejects_mismatched_inputs(kind):
    fusion = FUSION_MODULES[kind](PennSpec(), "f")
    with pytest.raises(DimensionError):
        fusion(Tensor(np.zeros(128)), Tensor(np.zeros(64)))


@pytest.mark.parametrize("kind", FUSION_KINDS)
def test_fusion_matches_numpy_restatement(kind):
    fusion = FUSION_MODULES[kind](PennSpec(), "f")
    _randomize(fusion, seed=3)
    a, b = _features(20, 128, 4), _features(20, 128, 5)
    np.testing.assert_allclose(fusion(Tensor(a), Tensor(b)).data, np_fusion(fusion, a, b), atol=1e-12)


def test_attention_symmetric_inputs_return_value():
    fusion = AttentionFusion(PennSpec(), "abf")
    _randomize(fusion, seed=7)
    e = Tensor(_features(10, 128, 8))
    w, e_att = fusion.attention(e, e)
    np.testing.assert_allclose(w.data, 0.5, atol=1e-15)
    np.testing.assert_allclose(e_att.data, fusion.value(e).data, atol=1e-10)
    # the query does not matter
    fusion.query.weights.data[:] *= -5
    np.testing.assert_allclose(fusion.attention(e, e)[1].data, fusion.value(e).data, atol=1e-10)


def test_channel_weighting_equal_importance_gives_mean():
    fusion = ChannelWeightedFusion(PennSpec(), "cawf")
    _randomize(fusion, seed=9)
    # constant (and equal) importance vectors on both sides
    for layer in (fusion.main_expand, fusion.supp_expand):
        layer.weights.data[:] = 0
        layer.bias.data[:] = 0.7
    a, b = _features(10, 128, 10), _features(10, 128, 11)
    w1, w2 = fusion.weights(Tensor(a), Tensor(b))
    np.testing.assert_allclose(w1.data, 0.5, atol=1e-15)
    np.testing.assert_allclose(fusion(Tensor(a), Tensor(b)).data, (a + b) / 2, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), scale=st.floats(0.01, 3.0))
def test_fusion_weight_and_sign_invariants(seed, scale):
    spec = PennSpec(width_multiplier=0.25)
    d = spec.feature_dim
    a, b = _features(8, d, seed), _features(8, d, seed + 1)
    a *= scale

    cawf = ChannelWeightedFusion(spec, "c")
    _randomize(cawf, seed)
    w1, w2 = cawf.weights(Tensor(a), Tensor(b))
    assert (w1.data > 0).all() and (w2.data > 0).all()
    np.testing.assert_allclose(w1.data + w2.data, 1.0, atol=1e-12)
    out = cawf(Tensor(a), Tensor(b)).data
    np.testing.assert_allclose(out, w1.data * a + w2.data * b, atol=1e-12)
    assert (out >= 0).all()

    abf = AttentionFusion(spec, "a")
    _randomize(abf, seed)
    w, _ = abf.attention(Tensor(a), Tensor(b))
    assert (w.data > 0).all()
    np.testing.assert_allclose(w.data.sum(axis=-1), 1.0, atol=1e-12)
    assert (abf(Tensor(a), Tensor(b)).data >= 0).all()

    for kind in ("fcf", "bnf"):
        fusion = FUSION_MODULES[kind](spec, kind)
        _randomize(fusion, seed)
        assert (fusion(Tensor(a), Tensor(b)).data >= 0).all()


# assembled network


@pytest.mark.parametrize("kind", FUSION_KINDS)
def test_forward_matches_numpy_composition(kind):
    net = PennNetwork(PennSpec(fusion=kind), seed=4)
    for layer in net.layers():
        layer.bias.data[:] = np.random.default_rng(5).normal(0, 0.1, layer.bias.shape)
    X = np.random.default_rng(6).normal(size=(16, 18))
    out = penn_forward(net, Tensor(X)).data
    assert out.shape == (16, 1) and np.isfinite(out).all()
    np.testing.assert_allclose(out, np_penn_forward(net, X), rtol=1e-12, atol=1e-12)


def test_rank1_input_gives_scalar():
    net = PennNetwork(seed=0)
    out = net(Tensor(np.random.default_rng(0).normal(size=18)))
    assert out.shape == (1,) and np.isfinite(out.item())


def test_feature_chain_shapes_and_signs():
    net = PennNetwork(PennSpec(fusion="bnf"), seed=1)
    feats = net.features(Tensor(np.random.default_rng(1).normal(size=(4, 18))))
    assert list(feats) == ["z_drive", "z1", "z2", "z3", "e1", "e2", "e_fusion"]
    for f in feats.values():
        assert f.shape == (4, 128) and (f.data >= 0).all()


def test_fusion_order_matters():
    net = PennNetwork(PennSpec(fusion="bnf"), seed=2)
    X = Tensor(np.random.default_rng(2).normal(size=(6, 18)))
    f = net.features(X)
    swapped = net.fusions[2](net.fusions[1](net.fusions[0](f["z_drive"], f["z3"]), f["z2"]), f["z1"])
    assert not np.allclose(net.head(swapped).data, net(X).data)


def test_fusion_stage_parameters_are_disjoint():
    net = PennNetwork(PennSpec(fusion="abf"), seed=0)
    before = [p.data.copy() for p in net.fusions[1].parameters()]
    for p in net.fusions[0].parameters():
        p.data += 1.0
    for p, b in zip(net.fusions[1].parameters(), before):
        np.testing.assert_array_equal(p.data, b)
    arrays = [p.data for p in net.parameters()]
    for i, a in enumerate(arrays):
        for b in arrays[i + 1 :]:
            assert not np.shares_memory(a, b)


def test_seeded_init():
    a = PennNetwork(seed=3).parameters()
    b = PennNetwork(seed=3).parameters()
    c = PennNetwork(seed=4).parameters()
    assert all(x.data.tobytes() == y.data.tobytes() for x, y in zip(a, b))
    assert any(x.data.tobytes() != z.data.tobytes() for x, z in zip(a, c))


# parameter counts and scaling


def test_parameter_counts():
    expected = {"fcf": 120_449, "bnf": 59_105, "abf": 46_865, "cawf": 71_873}
    for kind, n in expected.items():
        net = PennNetwork(PennSpec(fusion=kind))
        assert count_params(net) == n
        assert sum(p.size for p in net.parameters()) == n


def test_parameter_formula_by_layer():
    net = PennNetwork(PennSpec(fusion="cawf"))
    assert count_params(net) == sum((l.in_dim + 1) * l.out_dim for l in net.layers())
    assert DenseLayer(3, 32).n_params == 128


def test_scaling_family_counts():
    counts = [count_params(PennNetwork(scale_model(PennSpec(), f))) for f in (0.25, 0.5, 1, 2, 4)]
    assert counts == [4025, 15217, 59105, 232897, 924545]
    for got, expected in zip(counts, [4e3, 15e3, 59e3, 233e3, 925e3]):
        assert abs(got - expected) <= 0.05 * expected


def test_scale_identity_and_names():
    spec = PennSpec(fusion="abf")
    assert scale_model(spec, 1.0) == spec
    assert scale_model(PennSpec(), 0.25).name == "PENN-BNF-Down4"
    assert scale_model(PennSpec(), 4).name == "PENN-BNF-Up4"
    assert PennSpec().name == "PENN-BNF"


@given(width=st.integers(1, 512), factor=st.floats(0.01, 8.0))
def test_scale_width_rounding(width, factor):
    w = scale_width(width, factor)
    assert w >= 1
    assert abs(w - width * factor) <= 0.5 or w == 1


def test_spec_validation():
    with pytest.raises(ParameterError):
        PennSpec(fusion="gru")
    with pytest.raises(ParameterError):
        PennSpec(width_multiplier=0)
    with pytest.raises(ParameterError):
        scale_model(PennSpec(), -1)


def test_input_groups_follow_schema():
    assert INPUT_GROUPS == (3, 2, 11, 2)
    assert build_network("penn-bnf").architecture()["input_dims"] == [3, 2, 11, 2]


# end-to-end gradients


@pytest.mark.parametrize("kind", [f"penn-{k}" for k in FUSION_KINDS])
@pytest.mark.parametrize("seed", range(10))
def test_penn_gradients_match_finite_differences(kind, seed):
    net, X, y = gradient_check_case(kind, width=0.25, seed=seed)
    errors = gradient_errors(net, X, y)
    assert max(errors.values()) < 1e-4, errors
