"""Dev-only exhaustive validation of the fast argmax (not part of the package)."""
import itertools
import math
import random
import time

import numpy as np

from maxprod.argmax import ReadScratch, fast_argmax_k, fast_argmax_pair, sort_best
from maxprod.order_stats import enclosing_width, expected_steps, expected_steps_enumerate
from maxprod.semiring import MAX_PRODUCT, MAX_SUM, MIN_SUM


def brute_pair(va, vb, s):
    best, val = 0, s.combine(va[0], vb[0])
    for i in range(1, len(va)):
        v = s.combine(va[i], vb[i])
        if s.better(v, val):
            best, val = i, v
    return best, val


def values_from_ranks(ranks, n):
    # rank r -> value n - r (descending in rank, distinct)
    return [float(n - r) for r in ranks]


def exhaustive_pair(nmax=6):
    bad = 0
    for n in range(1, nmax + 1):
        idx = list(range(n))
        for pa_ranks in itertools.permutations(range(n)):
            va = values_from_ranks(pa_ranks, n)
            pa = sort_best(va)
            for pb_ranks in itertools.permutations(range(n)):
                vb = values_from_ranks(pb_ranks, n)
                pb = sort_best(vb)
                _, want = brute_pair(va, vb, MAX_PRODUCT)
                for mode in ("analysis", "symmetric", "early-stop"):
                    out = fast_argmax_pair(va, vb, pa, pb, mode, MAX_PRODUCT, validate=False)
                    if out.value != want:
                        bad += 1
                        print("PAIR FAIL", n, pa_ranks, pb_ranks, mode, out, want)
                # analysis steps == enclosing square width of the rank correspondence
                out = fast_argmax_pair(va, vb, pa, pb, "analysis", MAX_PRODUCT, validate=False)
                sigma = tuple(pb.inverse[pa.order[r]] for r in range(n))
                m = enclosing_width((sigma,), n)
                if out.steps != m:
                    bad += 1
                    print("STEPS FAIL", n, pa_ranks, pb_ranks, out.steps, m)
    print("exhaustive pair done, failures:", bad)
    return bad


def exhaustive_k(k, n, values_random=False, seed=0):
    rng = random.Random(seed)
    scratch = ReadScratch(n)
    bad = 0
    count = 0
    total_steps = 0
    for rank_tuples in itertools.product(itertools.permutations(range(n)), repeat=k):
        vs = []
        for ranks in rank_tuples:
            if values_random:
                vals = sorted((rng.random() for _ in range(n)), reverse=True)
                vs.append([vals[r] for r in ranks])
            else:
                vs.append(values_from_ranks(ranks, n))
        ps = [sort_best(v) for v in vs]
        # brute: left-to-right product
        want = None
        for i in range(n):
            v = vs[0][i]
            for t in range(1, k):
                v = MAX_PRODUCT.combine(v, vs[t][i])
            if want is None or v > want:
                want = v
        for mode in ("analysis", "early-stop"):
            out = fast_argmax_k(vs, ps, scratch, mode, MAX_PRODUCT, validate=False)
            if out.value != want:
                bad += 1
                if bad < 10:
                    print("K FAIL", k, n, rank_tuples, mode, out.value, want)
            if out.probes > n:
                bad += 1
                print("PROBES FAIL", k, n, rank_tuples, out.probes)
        out = fast_argmax_k(vs, ps, scratch, "analysis", MAX_PRODUCT, validate=False)
        total_steps += out.steps
        # steps must equal the enclosing hypercube width of the rank tuples
        # relative to list 0's order
        rel = tuple(
            tuple(ps[t + 1].inverse[ps[0].order[r]] for r in range(n))
            for t in range(k - 1)
        )
        if out.steps != enclosing_width(rel, n):
            bad += 1
            print("WIDTH FAIL", k, n, rank_tuples, out.steps, enclosing_width(rel, n))
        count += 1
    print(f"exhaustive K={k} N={n}: {count} cases, failures: {bad}, "
          f"mean steps {total_steps / count:.6f} vs E {float(expected_steps_enumerate(n, k)):.6f}")
    return bad + (0 if abs(total_steps / count - float(expected_steps_enumerate(n, k))) < 1e-12 else 1)


def random_large(trials=3000, seed=1):
    rng = np.random.default_rng(seed)
    bad = 0
    scratch = ReadScratch(513)
    for _ in range(trials):
        n = int(rng.integers(1, 513))
        k = int(rng.integers(2, 5))
        vs = [rng.random(n) for _ in range(k)]
        ps = [sort_best(v) for v in vs]
        acc = vs[0].copy()
        for t in range(1, k):
            acc = acc * vs[t]
        want = float(np.max(acc))
        out = fast_argmax_k(vs, ps, scratch, "analysis", MAX_PRODUCT, validate=False)
        if out.value != want or out.probes > n:
            bad += 1
            print("RANDOM K FAIL", n, k, out.value, want, out.probes)
        if k == 2:
            out2 = fast_argmax_pair(vs[0], vs[1], ps[0], ps[1], "early-stop", MAX_PRODUCT, validate=False)
            if out2.value != want:
                bad += 1
                print("RANDOM PAIR FAIL", n, out2.value, want)
    print("random large done, failures:", bad)
    return bad


def semiring_modes(trials=2000, seed=2):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(1, 80))
        va = rng.standard_normal(n)
        vb = rng.standard_normal(n)
        for s in (MAX_SUM, MIN_SUM):
            pa, pb = sort_best(va, s), sort_best(vb, s)
            want = None
            for i in range(n):
                v = s.combine(va[i], vb[i])
                if want is None or s.better(v, want):
                    want = v
            for mode in ("analysis", "symmetric", "early-stop"):
                out = fast_argmax_pair(va, vb, pa, pb, mode, s, validate=False)
                if out.value != want:
                    bad += 1
                    print("SEMIRING FAIL", s.kind, mode, n, out.value, want)
    print("semiring modes done, failures:", bad)
    return bad


def empirical_expectation():
    rng = np.random.default_rng(7)
    for n in (8, 64, 256):
        steps = []
        for _ in range(10000):
            va = rng.random(n)
            vb = rng.random(n)
            out = fast_argmax_pair(va, vb, sort_best(va), sort_best(vb), "analysis", validate=False)
            steps.append(out.steps)
        steps = np.asarray(steps, float)
        want = expected_steps(n)
        se = steps.std(ddof=1) / math.sqrt(len(steps))
        print(f"N={n}: mean={steps.mean():.4f} E={want:.4f} diff/se={(steps.mean()-want)/se:+.2f}")


t0 = time.time()
fails = 0
fails += exhaustive_pair(6)
fails += exhaustive_k(2, 5)
fails += exhaustive_k(2, 6)
fails += exhaustive_k(3, 4)
fails += exhaustive_k(3, 4, values_random=True)
fails += exhaustive_k(4, 3)
fails += random_large()
fails += semiring_modes()
print("enum E(M) cross-checks:",
      expected_steps_enumerate(2, 2), expected_steps_enumerate(4, 2),
      expected_steps_enumerate(2, 3))
empirical_expectation()
print(f"TOTAL FAILURES: {fails}  ({time.time()-t0:.1f}s)")
