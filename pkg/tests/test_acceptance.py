"""Acceptance criteria 1-10, one test each.

Every test prints a ``criterion N: PASS|FAIL`` line with its key numbers; the
terminal summary (see conftest.py) repeats the verdicts in one block.
"""

import math
import shutil
import time

import numpy as np
import pandas as pd
import pytest

import oracles
from tabautodiff import nn, pipeline, sde
from tabautodiff.autoencoder import (HETEROGENEOUS, MED_MSE, AutoencoderModel, AutoencoderSpec,
                                     loss_and_grads)
from tabautodiff.diffusion import (DiffusionBundle, SamplerConfig, dsm_loss,
                                   euler_maruyama_sample, train_diffusion)
from tabautodiff.evaluation import (TstrConfig, column_wd, corr_l2_diff, correlation_matrices,
                                   dcr, js_divergence, mean_dcr, pearson_matrix, split_real, theils_u,
                                   tstr_evaluate, wasserstein_1d)
from tabautodiff.evaluation.fidelity import correlation_ratio
from tabautodiff.fixtures import (classification_fixture, mixed_fixture, regression_fixture,
                                  write_fixture_csv)
from tabautodiff.nn import MlpSpec
from tabautodiff.schema import FeatureKind, infer_schema, postprocess, preprocess, read_csv
from tabautodiff.scorenet import ScoreNetSpec, make_score_net
from tabautodiff.sde import SdeConfig


def verdict(n, ok, detail=""):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"criterion {n} failed: {detail}"


# ---------------------------------------------------------------- 1

def _jitter(params, rng):
    """Zero-initialized biases put whole rows exactly on a ReLU kink (a dead
    previous layer feeds exact zeros), where central differences are not a
    derivative. A small random offset moves every check to a smooth point."""
    for k in params:
        params[k] = params[k] + rng.normal(0.0, 0.1, params[k].shape)
    return params


def _mlp_case(rng):
    depth = int(rng.integers(1, 4))
    width = int(rng.integers(2, 9))
    act = str(rng.choice(["relu", "elu", "silu", "sigmoid", "identity"]))
    loss = str(rng.choice(["mse", "bce", "ce"]))
    out = 3
    spec = MlpSpec(4, (width,) * (depth - 1) + (out,), (act,) * (depth - 1) + ("identity",))
    p = _jitter(nn.init_mlp(spec, rng), rng)
    x = rng.normal(size=(6, 4))
    if loss == "mse":
        y = rng.normal(size=(6, out))
        fn = lambda o: nn.mse(o, y)  # noqa: E731
    elif loss == "bce":
        y = (rng.random((6, out)) < 0.5).astype(float)
        fn = lambda o: nn.bce_with_logits(o, y)  # noqa: E731
    else:
        y = rng.integers(0, out, 6)
        fn = lambda o: nn.ce_with_logits(o, y)  # noqa: E731
    o, cache = nn.mlp_forward(spec, p, x)
    grads, _ = nn.mlp_backward(cache, fn(o)[1])
    return f"mlp-{act}-{loss}", nn.gradcheck(lambda: fn(nn.mlp_forward(spec, p, x)[0])[0], p,
                                             grads, rng=rng)


def _ae_case(rng, loss):
    t = mixed_fixture(10, seed=int(rng.integers(1000)))
    pt = preprocess(t, infer_schema(t, h_percent=10.0))
    model = AutoencoderModel.create(AutoencoderSpec(pt.layout.width, hidden=5, loss=loss),
                                    pt.layout, pt.schema.clamp_bounds(), rng)
    _jitter(model.params, rng)
    _, grads = loss_and_grads(model, pt.matrix)
    return f"ae-{loss}", nn.gradcheck(lambda: loss_and_grads(model, pt.matrix)[0], model.params,
                                      grads, rng=rng)


def _score_case(rng, variant):
    spec = ScoreNetSpec(variant, 3, stasy_widths=(4, 5), tab_dim=6, tab_blocks=2)
    net = make_score_net(spec)
    p = _jitter(net.init(rng), rng)
    x, t, w = rng.normal(size=(5, 3)), rng.uniform(0.01, 1.0, 5), rng.normal(size=(5, 3))
    _, cache = net.forward(p, x, t)
    grads, _ = net.backward(cache, w)
    f = lambda: float(np.sum(w * net.forward(p, x, t)[0]))  # noqa: E731
    return f"score-{variant}", nn.gradcheck(f, p, grads, rng=rng)


def _dsm_case(rng, variant):
    spec = ScoreNetSpec(variant, 2, stasy_widths=(4, 3), tab_dim=6, tab_blocks=2)
    bundle = DiffusionBundle.create(SdeConfig(), spec, rng)
    _jitter(bundle.params, rng)
    x0 = rng.normal(size=(6, 2))
    t = sde.sample_times(SdeConfig(), 6, rng)
    z = rng.standard_normal((6, 2))
    _, grads = dsm_loss(bundle, x0, t=t, z=z, mode="eval")
    f = lambda: dsm_loss(bundle, x0, t=t, z=z, mode="eval")[0]  # noqa: E731
    return f"dsm-{variant}", nn.gradcheck(f, bundle.params, grads, rng=rng)


def test_criterion_01_gradient_correctness():
    start = time.perf_counter()
    rng = nn.make_rng(2024)
    cases = [_mlp_case(rng) for _ in range(8)]
    cases += [_ae_case(rng, HETEROGENEOUS) for _ in range(2)]
    cases += [_ae_case(rng, MED_MSE) for _ in range(2)]
    for variant in ("stasy", "tab"):
        cases += [_score_case(rng, variant) for _ in range(2)]
        cases += [_dsm_case(rng, variant) for _ in range(2)]
    elapsed = time.perf_counter() - start
    worst = max(err for _, err in cases)
    ok = len(cases) == 20 and worst < 1e-4 and elapsed < 60
    verdict(1, ok, f"{len(cases)} configs, max rel err {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------- 2

def test_criterion_02_codec_round_trip():
    start = time.perf_counter()
    t = mixed_fixture(1000)
    s = infer_schema(t, scaler="minmax")
    pt = preprocess(t, s)
    back = postprocess(pt.to_decoded(), s)
    labels_ok = all(back[c].tolist() == t[c].tolist() for c in ("member", "color"))
    num_err = max(float(np.max(np.abs(back[c] - t[c]))) for c in ("age", "income", "balance"))
    col = s["balance"]
    codes = pt.cat_codes[:, s.layout.cat.index("balance__mixed")]
    spikes_ok = col.kind is FeatureKind.MIXED and all(
        (codes == k).sum() == count == (t["balance"] == v).sum()
        for k, (v, count) in enumerate(zip(col.repeated, col.repeated_counts), start=1))
    spike_vals = np.isin(back["balance"], col.repeated)
    spikes_ok &= bool(np.array_equal(spike_vals, np.isin(t["balance"], col.repeated)))
    elapsed = time.perf_counter() - start
    ok = labels_ok and num_err < 1e-6 and spikes_ok and elapsed < 1.0
    verdict(2, ok, f"labels exact={labels_ok}, max num err {num_err:.1e}, "
                   f"mixed counts exact={spikes_ok}, {elapsed:.2f}s")


# ---------------------------------------------------------------- 3

def test_criterion_03_vp_kernel():
    start = time.perf_counter()
    cfg = SdeConfig()
    e1 = abs(sde.mean_coef(cfg, 1.0) - math.exp(-5.025))
    e2 = abs(sde.marginal_std(cfg, 1.0) - math.sqrt(1 - math.exp(-10.05)))
    rng = nn.make_rng(0)
    mc = []
    for t in (0.1, 0.5, 0.9):
        xt = sde.perturb(cfg, np.zeros((100_000, 1)), t, rng.standard_normal((100_000, 1)))
        mc.append(abs(xt.std() / sde.marginal_std(cfg, t) - 1))
    grid = np.linspace(0.0, 1.0, 1000)
    e3 = float(np.max(np.abs(sde.mean_coef(cfg, grid) ** 2 + sde.marginal_std(cfg, grid) ** 2 - 1)))
    elapsed = time.perf_counter() - start
    ok = e1 < 1e-12 and e2 < 1e-12 and max(mc) < 0.01 and e3 < 1e-12 and elapsed < 10
    verdict(3, ok, f"kernel errs {e1:.1e}/{e2:.1e}, MC std rel err {max(mc):.4f}, "
                   f"variance err {e3:.1e}, {elapsed:.2f}s")


# ---------------------------------------------------------------- 4

def test_criterion_04_dsm_optimum():
    cfg = SdeConfig()
    rng = nn.make_rng(4)
    x0 = np.zeros((256, 4))
    t = sde.sample_times(cfg, 256, rng)
    z = rng.standard_normal(x0.shape)
    xt = sde.perturb(cfg, x0, t, z)
    score = -xt / sde.marginal_std(cfg, t)[:, None] ** 2
    loss, _ = sde.dsm_objective(cfg, score, t, z)
    verdict(4, loss < 1e-10, f"loss {loss:.2e}")


# ---------------------------------------------------------------- 5

@pytest.mark.slow
def test_criterion_05_distribution_recovery():
    start = time.perf_counter()
    rng = nn.make_rng(5)
    gauss = rng.standard_normal((5000, 2))
    bundle, _ = train_diffusion(gauss, SdeConfig(), ScoreNetSpec("tab", 2), seed=5)
    s = euler_maruyama_sample(bundle, 10_000, SamplerConfig(steps=1000, seed=1)).values
    mean_err = float(np.max(np.abs(s.mean(axis=0))))
    var_err = float(np.max(np.abs(s.var(axis=0) - 1)))

    comp = rng.integers(0, 2, 5000)
    gmm = np.where(comp == 0, -2.0, 2.0) + 0.3 * rng.standard_normal(5000)
    bundle, _ = train_diffusion(gmm[:, None], SdeConfig(), ScoreNetSpec("tab", 1), seed=6)
    g = euler_maruyama_sample(bundle, 10_000, SamplerConfig(steps=1000, seed=2)).values[:, 0]
    w1 = wasserstein_1d(g, gmm)
    elapsed = time.perf_counter() - start
    ok = mean_err < 0.05 and var_err < 0.15 and w1 < 0.15 and elapsed < 600
    verdict(5, ok, f"|mean| {mean_err:.4f}, |var-1| {var_err:.4f}, GMM W1 {w1:.4f}, "
                   f"{elapsed:.0f}s")


# ---------------------------------------------------------------- 6

def test_criterion_06_metric_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = dict.fromkeys(["wd", "js", "pearson", "theils_u", "corr_ratio", "dcr"], 0.0)
    for _ in range(100):
        n, m = int(rng.integers(2, 21)), int(rng.integers(1, 21))
        real = pd.DataFrame({"x": rng.normal(size=n).round(2), "y": rng.normal(size=n),
                             "c": rng.choice(list("abcd"), n), "d": rng.choice(list("pq"), n)})
        syn = pd.DataFrame({"x": rng.normal(size=m).round(2), "y": rng.normal(size=m),
                            "c": rng.choice(list("abce"), m), "d": rng.choice(list("pq"), m)})
        worst["wd"] = max(worst["wd"], abs(wasserstein_1d(real.x, syn.x)
                                           - oracles.wd_transport(real.x, syn.x)))
        worst["js"] = max(worst["js"], abs(js_divergence(real.c, syn.c)
                                           - oracles.js_direct(list(real.c), list(syn.c))))
        worst["pearson"] = max(worst["pearson"], abs(
            pearson_matrix(real[["x", "y"]].to_numpy())[0, 1]
            - oracles.pearson_definition(list(real.x), list(real.y))))
        worst["theils_u"] = max(worst["theils_u"], abs(
            theils_u(list(real.c), list(real.d)) - oracles.theils_u_count(list(real.c), list(real.d))))
        worst["corr_ratio"] = max(worst["corr_ratio"], abs(
            correlation_ratio(list(real.c), real.y) - oracles.corr_ratio_loops(list(real.c), list(real.y))))
        # raw numericals plus one-hot over the union of categories, built independently
        cats = {c: sorted(set(real[c]) | set(syn[c])) for c in ("c", "d")}

        def enc(df):
            rows = []
            for r in df.itertuples(index=False):
                rows.append([r.x, r.y] + [float(r.c == k) for k in cats["c"]]
                            + [float(r.d == k) for k in cats["d"]])
            return rows

        ref = oracles.dcr_double_loop(enc(real), enc(syn))
        worst["dcr"] = max(worst["dcr"], float(np.max(np.abs(dcr(real, syn) - ref))))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) < 1e-9 and elapsed < 60
    verdict(6, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f}s")


# ---------------------------------------------------------------- 7

@pytest.mark.slow
def test_criterion_07_end_to_end_fidelity(tmp_path):
    start = time.perf_counter()
    data = tmp_path / "fixture.csv"
    write_fixture_csv(data, 1000, seed=0)
    real = read_csv(data)
    run = pipeline.fit(pipeline.RunConfig(data=str(data), variant="TabAutoDiff",
                                          output_dir=str(tmp_path / "run"), seed=0))
    pipeline.sample(run, 1000, 0, tmp_path / "syn.csv")
    syn = read_csv(tmp_path / "syn.csv")
    schema = infer_schema(real)
    rng = nn.make_rng(7)

    wd_ok, wd_txt = True, []
    for c in ("age", "income", "balance"):
        r = real[c].to_numpy(float)
        wd_syn = column_wd(r, syn[c].to_numpy(float))
        wd_uni = column_wd(r, rng.uniform(r.min(), r.max(), len(r)))
        wd_ok &= wd_syn < wd_uni
        wd_txt.append(f"{c} {wd_syn:.3f}<{wd_uni:.3f}")

    col = schema["balance"]
    freq_gap = max(abs((real.balance == v).mean() - (syn.balance == v).mean())
                   for v in col.repeated)

    shuffled = real.copy()
    for c in shuffled.columns:
        shuffled[c] = rng.permutation(shuffled[c].to_numpy())
    ref = correlation_matrices(real, schema)
    d_syn = corr_l2_diff(ref, correlation_matrices(syn, schema))
    d_shuf = corr_l2_diff(ref, correlation_matrices(shuffled, schema))
    corr_ok = all(d_syn[k] < d_shuf[k] for k in d_syn)
    elapsed = time.perf_counter() - start
    ok = wd_ok and freq_gap <= 0.10 and corr_ok and elapsed < 900
    corr_txt = ", ".join(f"{k} {d_syn[k]:.3f}<{d_shuf[k]:.3f}" for k in d_syn)
    verdict(7, ok, f"WD [{'; '.join(wd_txt)}], spike freq gap {freq_gap:.3f}, "
                   f"corr L2 [{corr_txt}], {elapsed:.0f}s")


# ---------------------------------------------------------------- 8

def test_criterion_08_tstr_identity():
    clf = classification_fixture(600, seed=8)
    cfg = TstrConfig("multiclass", seed=8)
    res_c = tstr_evaluate(clf, split_real(clf, cfg)[0], "target", cfg)
    reg = regression_fixture(600, seed=8)
    cfg_r = TstrConfig("regression", seed=8)
    res_r = tstr_evaluate(reg, split_real(reg, cfg_r)[0], "target", cfg_r)
    keys_ok = all({"accuracy", "macro_f1", "auroc"} <= set(v) for v in res_c.real.values()) and \
        all({"r2", "rmse"} <= set(v) for v in res_r.real.values())
    ok = res_c.real == res_c.synthetic and res_r.real == res_r.synthetic and keys_ok
    verdict(8, ok, f"classification models {sorted(res_c.real)}, "
                   f"regression models {sorted(res_r.real)}")


# ---------------------------------------------------------------- 9

def test_criterion_09_dcr_sanity():
    real = mixed_fixture(1000, seed=9)
    train, _ = split_real(real, TstrConfig("binary", seed=9))
    base = mean_dcr(real, train)
    rng = nn.make_rng(9)
    num = ["age", "income", "balance"]
    means = []
    for s in (0.01, 0.1, 1.0):
        noisy = train.copy()
        noisy[num] = noisy[num].to_numpy(float) + rng.normal(0.0, s, (len(train), len(num)))
        means.append(mean_dcr(real, noisy))
    ok = base == 0.0 and means[0] < means[1] < means[2]
    verdict(9, ok, f"MDCR identity {base}, noisy {[round(m, 5) for m in means]}")


# ---------------------------------------------------------------- 10

TINY = dict(ae_hidden=32, ae_epochs=20, diff_steps=100, stasy_widths=[16, 16], tab_dim=32,
            tab_blocks=2, sampler_steps=50, gan_steps=100, gan_hidden=32)


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_10_determinism_and_persistence(tmp_path):
    data = tmp_path / "fixture.csv"
    write_fixture_csv(data, 300, seed=10)
    problems = []
    for variant in sorted(pipeline.VARIANTS):
        outputs = []
        for rep in ("a", "b"):
            root = tmp_path / rep
            cfg = pipeline.RunConfig.from_dict({**TINY, "data": str(data), "target": "member",
                                                "variant": variant,
                                                "output_dir": str(root / "run")})
            pipeline.fit(cfg)
            pipeline.sample(root / "run", 200, 3, root / "syn.csv")
            pipeline.evaluate(data, {variant: [root / "syn.csv"]}, "member", root / "report")
            files = _files(root)
            files.pop("run/manifest.json")  # records its own output path
            files["syn.csv.meta.json"] = files["syn.csv.meta.json"].replace(str(root).encode(), b"")
            outputs.append(files)
        if outputs[0] != outputs[1]:
            diff = sorted(k for k in outputs[0] if outputs[0][k] != outputs[1].get(k))
            problems.append(f"{variant}: differing {diff}")
        # persistence: save and reload every component, compare inference outputs
        run = pipeline.load_run(tmp_path / "a" / "run")
        z = nn.make_rng(1).normal(size=(30, run.autoencoder.spec.width))
        before = pipeline.generate(run, 60, seed=4)
        dec_before = run.autoencoder.decoder_forward(z)[0]
        run.autoencoder.save(tmp_path / "ae")
        run.generator.save(tmp_path / "gen")
        run.autoencoder = AutoencoderModel.load(tmp_path / "ae")
        run.generator = type(run.generator).load(tmp_path / "gen")
        after = pipeline.generate(run, 60, seed=4)
        if not (before.equals(after) and np.array_equal(dec_before,
                                                        run.autoencoder.decoder_forward(z)[0])):
            problems.append(f"{variant}: reload changed outputs")
        for p in (tmp_path / "a", tmp_path / "b"):
            shutil.rmtree(p)
    verdict(10, not problems, "; ".join(problems) or "4 variants byte-identical and reloadable")
