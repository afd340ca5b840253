"""Top-k compression: distortion bounds versus k, and the size selectors.

For one device/server round this prints, per candidate k: the true
resampling-distortion TVD, its exact-denominator upper bound, and the
device-only (softplus) upper bound; then it runs the offline and online
size selectors and shows the payload they pay for.
"""

import numpy as np

from hybridlm import (
    LinearRejectionModel,
    OracleSpec,
    PayloadSpec,
    SoftplusConfig,
    compress,
    distorted_resample_dist,
    payload_bits,
    reconstruct,
    resample_dist,
    select_k_offline,
    select_k_online,
    softmax,
    sort_desc,
    tvd,
    utv_bound,
    utv_bound_online,
)
from hybridlm.dist import sample
from hybridlm.oracle import SyntheticOracle

vocab = 2048
spec = OracleSpec(kind="synthetic", vocab_size=vocab, zipf_s=4.0, divergence=1.0, seed=9)
inputs = SyntheticOracle(spec).next_round([])
x = softmax(inputs.slm_logits)
y = softmax(inputs.llm_logits)
rng = np.random.default_rng(5)
d = sample(x, rng)
s = sort_desc(x)
rank_d = s.rank_of(d)
beta_d = max(0.0, 1.0 - float(y.probs[d]) / float(x.probs[d]))
cfg = SoftplusConfig(eta=10.0)
p = resample_dist(x, y)

print(f"one round at |V|={vocab}: draft rank {rank_d + 1}, "
      f"x_d={x.probs[d]:.4f}, true rejection prob {beta_d:.4f}")
print(f"device/server divergence tvd(x, y) = {tvd(x, y):.4f}\n")

print(f"{'k':>6} {'tvd(p,q)':>10} {'exact bound':>12} {'online bound':>13}")
for k in (1, 2, 4, 8, 16, 32, 64, 256, 1024, 2048):
    x_hat = reconstruct(compress(s, k, d))
    q, _ = distorted_resample_dist(x_hat, y)
    exact = utv_bound(x, x_hat, y, k)
    online = utv_bound_online(s, x_hat, float(x.probs[d]), beta_d, k, cfg)
    print(f"{k:>6} {tvd(p, q):>10.5f} {exact:>12.5f} {online:>13.5f}")

theta = 0.1
payload = PayloadSpec(vocab_size=vocab, b_prob=8)
model = LinearRejectionModel(a=0.5, b=0.0, mse=0.0, r2=1.0)

# Offline: pretend this round's exact bound is the long-run average.
ks = np.arange(1, vocab + 1, 8)
vals = np.array([
    utv_bound(x, reconstruct(compress(s, int(k), d)), y, int(k)) for k in ks
])
off = select_k_offline(ks, vals, theta, vocab)
print(f"\noffline selection at theta={theta}: k*={off.k_star} "
      f"(bound {off.bound_value_at_k:.4f})")

for u in (0.3, 0.6, 0.9):
    sel = select_k_online(s, rank_d, u, model, theta, cfg)
    bits = payload_bits(sel.k_star + (0 if rank_d < sel.k_star else 1), payload)
    print(f"online selection at u={u:.1f}: k*={sel.k_star:>5} "
          f"(bound {sel.bound_value_at_k:.4f}, payload {bits} bits)")

full = payload_bits(vocab, payload)
print(f"\nfull-vocabulary payload for comparison: {full} bits")
