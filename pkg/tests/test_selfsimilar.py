import json
from collections import Counter

import numpy as np
from scipy import stats

from frogsim.engine import SimConfig, run_frog_model
from frogsim.operators import StarModelParams, monte_carlo_B
from frogsim.selfsimilar import SelfSimilarTrace, run_self_similar, sample_V
from frogsim.tree import ROOT, ROOT_CHILD, parent


def cfg(**kw):
    base = dict(d=2, mu=2.0, walk="self-similar", depth_cap=9, trials=50, seed=5)
    base.update(kw)
    return SimConfig(**base)


def test_mu_zero_is_point_mass_at_zero():
    v = sample_V(cfg(mu=0.0, trials=20))
    assert v.dist.values.tolist() == [0] and v.dist.probs.tolist() == [1.0]
    rec = run_self_similar(cfg(mu=0.0), 0)
    assert rec.activated_vertices == cfg().depth_cap + 1


def test_edge_rule_and_visited_shape():
    for d in (2, 3):
        for t in range(25):
            tr = SelfSimilarTrace()
            rec = run_self_similar(cfg(d=d, mu=2.5, depth_cap=7), t, trace=tr)
            visited = set(tr.activator) | {ROOT}
            assert len(visited) == rec.activated_vertices
            # exactly one continuing crossing per visited non-root vertex
            cont = Counter(v for _, _, v, ok in tr.crossings if ok)
            assert set(cont) == set(tr.activator) and set(cont.values()) == {1}
            for time, frog, v, ok in tr.crossings:
                if not ok:
                    assert time >= tr.activation_time[v]
            # connected, contains the distinguished child, no other child of the root
            assert ROOT_CHILD in visited
            assert all(parent(v) in visited for v in visited if v)
            assert [v for v in visited if len(v) == 1] == [ROOT_CHILD]


def test_root_visits_count_upward_arrivals():
    for t in range(20):
        tr = SelfSimilarTrace()
        rec = run_self_similar(cfg(), t, trace=tr)
        assert tr.emissions[ROOT_CHILD] == rec.root_visits


def test_reseeding_a_subtree_leaves_the_other_alone():
    # redraw everything inside (0, 1); the (0, 0) subtree's output depends only on
    # its own keys plus the frog that activated it
    changed = compared = 0
    for t in range(30):
        base, alt = SelfSimilarTrace(), SelfSimilarTrace()
        run_self_similar(cfg(depth_cap=8), t, trace=base)
        run_self_similar(cfg(depth_cap=8), t, trace=alt, reseed={(0, 1): 17})
        root = (0, 0)
        if root in base.activator and base.activator[root] == alt.activator.get(root):
            compared += 1
            inside = [v for v in base.emissions if v[:2] == root]
            assert [base.emissions[v] for v in inside] == [alt.emissions[v] for v in inside]
            assert {v for v in base.activator if v[:2] == root} == {v for v in alt.activator if v[:2] == root}
        if base.emissions[(0, 1)] != alt.emissions[(0, 1)]:
            changed += 1
    assert changed > 0 and compared > 0


def test_loop_erased_paths_coupling():
    c = cfg(walk="srw", mu=2.0, depth_cap=8)
    for t in range(60):
        ss = run_self_similar(c, t, paths="loop-erased")
        le = run_frog_model(c, t, loop_erase=True)
        full = run_frog_model(c, t)
        assert ss.root_visits <= le.root_visits <= full.root_visits


def test_empirical_v_json():
    v = sample_V(cfg(trials=30, depth_cap=6))
    data = json.loads(v.to_json())
    assert set(data) == {"values", "probabilities", "censored_fraction"}
    assert abs(sum(data["probabilities"]) - 1) < 1e-12
    assert data["censored_fraction"] == 1.0  # the initial frog always runs into the cap


def test_finite_depth_fixed_point():
    # the cap-h model is the star cascade fed with the cap-(h-1) model
    h, n = 8, 3000
    lower = sample_V(cfg(depth_cap=h - 1, trials=n, seed=21))
    upper = sample_V(cfg(depth_cap=h, trials=n, seed=22))
    pushed = monte_carlo_B(StarModelParams(2, 2.0, lower.dist), 200000, seed=3)
    # chi-square homogeneity between the pushed law (large sample) and direct samples
    top = int(np.percentile(upper.samples, 99))
    obs = np.bincount(np.minimum(upper.samples, top), minlength=top + 1)
    probs = pushed.pmf(np.arange(top))
    probs = np.append(probs, 1 - probs.sum())
    keep = probs * n >= 5
    obs_k = np.append(obs[keep], obs[~keep].sum())
    exp_k = np.append(probs[keep], probs[~keep].sum()) * n
    nz = exp_k > 0
    pval = stats.chisquare(obs_k[nz], exp_k[nz] * obs_k[nz].sum() / exp_k[nz].sum()).pvalue
    assert pval > 1e-3


def test_self_similar_thread_independence():
    c = cfg(trials=12, depth_cap=7)
    a = sample_V(c, threads=1)
    b = sample_V(c, threads=4)
    assert np.array_equal(a.samples, b.samples)


def test_kept_excludes_censored_when_asked():
    v = sample_V(cfg(trials=10, depth_cap=5), exclude_censored=True)
    assert len(v.kept()) == 0
