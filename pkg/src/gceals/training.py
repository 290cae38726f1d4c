"""Joint embedding clustering with a Gaussian cluster head.

The cluster head holds per-cluster means, diagonal covariances (stored as
log-variances so positivity is structural), and non-gradient cluster weights.
A sample's soft assignment is the exponential kernel of its Mahalanobis
distance; the posterior multiplies in the cluster weights and renormalizes.
A small projection head turns embeddings into softmax assignments trained to
match the posterior via cross-entropy, jointly with the reconstruction loss.

Also provides the t-distribution baseline mode (``dec`` / ``idec``): trainable
centroids under a sharpened frequency-normalized target and a KL loss.

All gradients are exact reverse-mode; weights are updated by their closed
form on the full dataset once per epoch and trigger early stopping when any
weight falls to half of 1/K.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .baselines import kmeans
from .linalg import DenseMatrix, Rng, row_normalize, row_softmax
from .neuralnet import (
    AdamState,
    DivergenceError,
    MlpHead,
    Network,
    backward,
    backward_range,
    encode,
    forward,
    init_network,
    mlp_plan,
    pretrain_autoencoder,
    reconstruction_grad,
    reconstruction_loss,
)

KERNEL_FLOOR = 1e-300
LOG_FLOOR = 1e-12

MODE_GCEALS = "gceals"
MODE_DEC = "dec"
MODE_IDEC = "idec"

STOP_COMPLETED = "completed"
STOP_WEIGHT_COLLAPSE = "weight-collapse"


@dataclass
class ClusterHead:
    """Trainable per-cluster means and log-variances, plus closed-form weights."""

    k: int
    means: DenseMatrix  # (k, m)
    log_variances: DenseMatrix  # (k, m)
    weights: np.ndarray  # (k,), on the simplex, not updated by gradients

    @property
    def variances(self) -> DenseMatrix:
        return np.exp(self.log_variances)

    def covariance_determinants(self) -> np.ndarray:
        return np.prod(self.variances, axis=1)


@dataclass
class Assignments:
    """Every per-sample distribution the head produces for one batch."""

    distances: DenseMatrix
    kernel: DenseMatrix
    likelihood: DenseMatrix
    posterior: DenseMatrix
    head_softmax: DenseMatrix | None


@dataclass
class GcealsConfig:
    embedding_dim: int
    gamma: float = 0.1
    pretrain_epochs: int = 1000
    finetune_epochs: int = 1000
    batch_cap: int = 256
    early_stop_factor: float = 0.5
    mode: str = MODE_GCEALS
    learning_rate: float = 0.001

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not 0.0 < self.early_stop_factor < 1.0:
            raise ValueError("early_stop_factor must be in (0, 1)")
        if self.mode not in (MODE_GCEALS, MODE_DEC, MODE_IDEC):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if self.pretrain_epochs < 1 or self.finetune_epochs < 1:
            raise ValueError("epoch counts must be >= 1")


@dataclass
class TrainReport:
    """Per-epoch traces plus the final assignments of a training run."""

    pretrain_losses: list = field(default_factory=list)
    recon_losses: list = field(default_factory=list)
    cluster_losses: list = field(default_factory=list)
    weight_trace: list = field(default_factory=list)
    centroid_shifts: list = field(default_factory=list)
    cov_determinants: list = field(default_factory=list)
    stop_epoch: int = 0
    stop_reason: str = STOP_COMPLETED
    hard_labels: np.ndarray | None = None
    posterior: DenseMatrix | None = None
    scores: dict | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "pretrain_losses": self.pretrain_losses,
                "recon_losses": self.recon_losses,
                "cluster_losses": self.cluster_losses,
                "weight_trace": [list(map(float, w)) for w in self.weight_trace],
                "centroid_shifts": [list(map(float, s)) for s in self.centroid_shifts],
                "cov_determinants": [list(map(float, d)) for d in self.cov_determinants],
                "stop_epoch": self.stop_epoch,
                "stop_reason": self.stop_reason,
                "hard_labels": None if self.hard_labels is None
                else [int(v) for v in self.hard_labels],
                "posterior": None if self.posterior is None else self.posterior.tolist(),
                "scores": self.scores,
            }
        )

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["epoch", "recon_loss", "cluster_loss", "min_weight",
                 "max_centroid_shift", "min_cov_det"]
            )
            for e in range(len(self.recon_losses)):
                writer.writerow(
                    [
                        e + 1,
                        repr(self.recon_losses[e]),
                        repr(self.cluster_losses[e]),
                        repr(float(np.min(self.weight_trace[e]))),
                        repr(float(np.max(self.centroid_shifts[e]))),
                        repr(float(np.min(self.cov_determinants[e]))),
                    ]
                )


@dataclass
class GcealsRun:
    autoencoder: Network
    head: ClusterHead
    mlp: MlpHead | None
    report: TrainReport


def mahalanobis(z: np.ndarray, mean: np.ndarray, variances: np.ndarray) -> float:
    """Covariance-scaled distance sqrt(sum((z-mean)^2 / variances))."""
    variances = np.asarray(variances, dtype=np.float64)
    if np.any(variances <= 0):
        raise ValueError("variances must be positive")
    diff = np.asarray(z, dtype=np.float64) - np.asarray(mean, dtype=np.float64)
    return float(np.sqrt(np.sum(diff * diff / variances)))


def mahalanobis_matrix(z_batch: DenseMatrix, head: ClusterHead) -> DenseMatrix:
    """Distances of every sample to every cluster, shape (n, k)."""
    diff = z_batch[:, None, :] - head.means[None, :, :]
    t = np.sum(diff * diff / head.variances[None, :, :], axis=2)
    return np.sqrt(np.maximum(t, 0.0))


def soft_assign(z_batch: DenseMatrix, head: ClusterHead) -> DenseMatrix:
    """Exponential kernel of the Mahalanobis distance, floored away from zero."""
    return np.maximum(np.exp(-mahalanobis_matrix(z_batch, head)), KERNEL_FLOOR)


def likelihood_and_weights(s: DenseMatrix):
    """Row-normalized kernel and the column-mean cluster weights."""
    p_prime = row_normalize(s)
    return p_prime, p_prime.mean(axis=0)


def posterior(p_prime: DenseMatrix, weights: np.ndarray) -> DenseMatrix:
    """Likelihood times cluster weight, renormalized per sample."""
    return row_normalize(p_prime * weights[None, :])


def head_softmax(z_batch: DenseMatrix, mlp: MlpHead) -> DenseMatrix:
    """Softmax cluster assignments from the projection head's logits."""
    return row_softmax(forward(mlp, z_batch)[-1])


def compute_assignments(z_batch: DenseMatrix, head: ClusterHead,
                        mlp: MlpHead | None = None) -> Assignments:
    d = mahalanobis_matrix(z_batch, head)
    s = np.maximum(np.exp(-d), KERNEL_FLOOR)
    p_prime, _ = likelihood_and_weights(s)
    p = posterior(p_prime, head.weights)
    q = head_softmax(z_batch, mlp) if mlp is not None else None
    return Assignments(distances=d, kernel=s, likelihood=p_prime, posterior=p,
                       head_softmax=q)


def clustering_loss(p: DenseMatrix, q: DenseMatrix) -> float:
    """Cross-entropy -(1/N) sum p log q with q floored inside the log."""
    return float(-np.sum(p * np.log(np.maximum(q, LOG_FLOOR))) / p.shape[0])


def joint_loss(recon: float, cluster: float, gamma: float) -> float:
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return recon + gamma * cluster


def balanced_batch(pseudo_labels: np.ndarray, batch_cap: int, rng: Rng) -> np.ndarray:
    """One epoch's class-balanced sample indices.

    Per-cluster quota is min(smallest cluster size, batch_cap // k); the quota
    is drawn without replacement from every cluster, fresh each call.
    """
    counts = np.bincount(pseudo_labels)
    if np.any(counts == 0):
        raise ValueError("every pseudo-label cluster must be non-empty")
    k = counts.size
    quota = int(min(counts.min(), batch_cap // k))
    if quota < 1:
        raise ValueError(f"batch_cap {batch_cap} too small for {k} clusters")
    picks = []
    for j in range(k):
        members = np.flatnonzero(pseudo_labels == j)
        picks.append(members[rng.choice(members.size, quota)])
    return np.concatenate(picks)


def early_stop_check(weights: np.ndarray, k: int, factor: float) -> bool:
    """True when any cluster weight has fallen to factor/k or below."""
    return bool(np.min(weights) <= factor / k)


def _gaussian_head_gradients(z: DenseMatrix, head: ClusterHead, mlp: MlpHead):
    """Batch cluster loss and exact gradients through both p and q.

    Returns (cluster_loss, dZ, dMeans, dLogVars, mlp_grads, dZ_mlp). The
    cluster weights are treated as constants; the kernel floor and the log
    floor contribute zero gradient where active.
    """
    n = z.shape[0]
    diff = z[:, None, :] - head.means[None, :, :]  # (n, k, m)
    inv_var = 1.0 / head.variances  # (k, m)
    scaled = diff * inv_var[None, :, :]
    t = np.sum(diff * scaled, axis=2)
    d = np.sqrt(np.maximum(t, 0.0))
    s_raw = np.exp(-d)
    floored = s_raw < KERNEL_FLOOR
    s = np.maximum(s_raw, KERNEL_FLOOR)
    row_sum = s.sum(axis=1, keepdims=True)
    p_prime = s / row_sum
    u = p_prime * head.weights[None, :]
    u_sum = u.sum(axis=1, keepdims=True)
    if np.any(u_sum <= 0):
        raise ValueError("posterior row collapsed to zero mass")
    p = u / u_sum

    acts = forward(mlp, z)
    q = row_softmax(acts[-1])
    q_floored = np.maximum(q, LOG_FLOOR)
    loss = float(-np.sum(p * np.log(q_floored)) / n)

    # path through p: cross-entropy -> posterior -> likelihood -> kernel -> distance
    g_p = -np.log(q_floored) / n
    g_u = (g_p - np.sum(g_p * p, axis=1, keepdims=True)) / u_sum
    g_p_prime = g_u * head.weights[None, :]
    g_s = (g_p_prime - np.sum(g_p_prime * p_prime, axis=1, keepdims=True)) / row_sum
    g_s[floored] = 0.0
    g_d = -s_raw * g_s
    g_t = g_d / (2.0 * np.maximum(d, 1e-12))
    g_t2 = 2.0 * g_t[:, :, None] * scaled
    d_z = np.sum(g_t2, axis=1)
    d_means = -np.sum(g_t2, axis=0)
    d_logvar = -np.sum(g_t[:, :, None] * diff * scaled, axis=0)

    # path through q: cross-entropy -> softmax -> projection head
    g_q = np.where(q > LOG_FLOOR, -p / q_floored / n, 0.0)
    g_logits = q * (g_q - np.sum(g_q * q, axis=1, keepdims=True))
    mlp_grads, d_z_mlp = backward(mlp, acts, g_logits)
    return loss, d_z, d_means, d_logvar, mlp_grads, d_z_mlp


def joint_loss_eval(ae: Network, mlp: MlpHead, head: ClusterHead,
                    x_batch: DenseMatrix, gamma: float) -> float:
    """Forward-only joint loss; the finite-difference side of the gradient check."""
    acts = forward(ae, x_batch)
    recon = reconstruction_loss(x_batch, acts[-1])
    z = acts[ae.plan.bottleneck]
    assign = compute_assignments(z, head, mlp)
    cluster = clustering_loss(assign.posterior, assign.head_softmax)
    return joint_loss(recon, cluster, gamma)


def joint_step_gradients(ae: Network, mlp: MlpHead, head: ClusterHead,
                         x_batch: DenseMatrix, gamma: float):
    """One batch's losses and gradients for every trainable tensor.

    Gradient layout matches [ae.params..., means, log_variances, mlp.params...].
    """
    bn = ae.plan.bottleneck
    n_layers = ae.plan.n_layers
    acts = forward(ae, x_batch)
    x_hat = acts[-1]
    z = acts[bn]
    recon = reconstruction_loss(x_batch, x_hat)
    cluster, d_z_head, d_means, d_logvar, mlp_grads, d_z_mlp = \
        _gaussian_head_gradients(z, head, mlp)
    dec_grads, d_z_recon = backward_range(ae, acts, reconstruction_grad(x_batch, x_hat),
                                          bn, n_layers)
    d_z_total = d_z_recon + gamma * (d_z_head + d_z_mlp)
    enc_grads, _ = backward_range(ae, acts, d_z_total, 0, bn, need_input_grad=False)
    grads = enc_grads + dec_grads + [gamma * d_means, gamma * d_logvar] \
        + [gamma * g for g in mlp_grads]
    return recon, cluster, grads


def _init_from_kmeans(ae: Network, x: DenseMatrix, k: int, rng: Rng):
    z = encode(ae, x)
    km = kmeans(z, k, rng)
    counts = np.bincount(km.labels, minlength=k)
    if np.any(counts == 0):
        raise ValueError("empty pseudo-cluster at initialization")
    return km.labels, km.centroids.copy()


def train_gceals(x: DenseMatrix, k: int, config: GcealsConfig, rng: Rng,
                 pretrained: Network | None = None) -> GcealsRun:
    """Full joint training run.

    Pretrains the autoencoder (or continues from `pretrained`), initializes the
    cluster head from K-means on the embedding with unit variances and uniform
    weights, then fine-tunes: one class-balanced batch per epoch, one Adam step
    over encoder, decoder, means, log-variances, and projection head jointly,
    followed by a full-dataset weight update and the weight-collapse check.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    m = config.embedding_dim
    pre_rng, km_rng, mlp_rng, batch_rng = rng.split(4)
    report = TrainReport()
    if pretrained is None:
        ae, report.pretrain_losses = pretrain_autoencoder(
            x, m, config.pretrain_epochs, config.batch_cap, pre_rng,
            learning_rate=config.learning_rate)
    else:
        ae = pretrained
        if ae.plan.sizes[ae.plan.bottleneck] != m:
            raise ValueError("pretrained bottleneck width != config.embedding_dim")
    pseudo, centroids = _init_from_kmeans(ae, x, k, km_rng)
    head = ClusterHead(k=k, means=centroids, log_variances=np.zeros((k, m)),
                       weights=np.full(k, 1.0 / k))
    mlp = init_network(mlp_plan(m, k), mlp_rng)

    params = ae.params + [head.means, head.log_variances] + mlp.params
    adam = AdamState(params, learning_rate=config.learning_rate)
    for epoch in range(1, config.finetune_epochs + 1):
        idx = balanced_batch(pseudo, config.batch_cap, batch_rng)
        xb = x[idx]
        recon, cluster, grads = joint_step_gradients(ae, mlp, head, xb, config.gamma)
        total = joint_loss(recon, cluster, config.gamma)
        if not np.isfinite(total):
            raise DivergenceError(epoch, total)
        mu_before = head.means.copy()
        adam.step(params, grads)

        z_full = encode(ae, x)
        p_prime, weights = likelihood_and_weights(soft_assign(z_full, head))
        head.weights = weights

        report.recon_losses.append(recon)
        report.cluster_losses.append(cluster)
        report.weight_trace.append(weights.copy())
        report.centroid_shifts.append(
            np.sqrt(((head.means - mu_before) ** 2).sum(axis=1)))
        report.cov_determinants.append(head.covariance_determinants())
        report.stop_epoch = epoch
        if early_stop_check(weights, k, config.early_stop_factor):
            report.stop_reason = STOP_WEIGHT_COLLAPSE
            break

    z_full = encode(ae, x)
    p_prime, _ = likelihood_and_weights(soft_assign(z_full, head))
    p = posterior(p_prime, head.weights)
    report.posterior = p
    report.hard_labels = np.argmax(p, axis=1)
    return GcealsRun(autoencoder=ae, head=head, mlp=mlp, report=report)


def tdist_q(z_batch: DenseMatrix, centroids: DenseMatrix) -> DenseMatrix:
    """Student-t kernel assignments (1 + ||z - mu||^2)^-1, row-normalized."""
    diff = z_batch[:, None, :] - centroids[None, :, :]
    w = 1.0 / (1.0 + np.sum(diff * diff, axis=2))
    return w / w.sum(axis=1, keepdims=True)


def dec_target(q: DenseMatrix) -> DenseMatrix:
    """Sharpened target: square q, discount by soft cluster frequency, renormalize."""
    f = q.sum(axis=0)
    if np.any(f <= 0):
        raise ValueError("zero cluster frequency in target computation")
    weight = q * q / f[None, :]
    return weight / weight.sum(axis=1, keepdims=True)


def kl_divergence(p: DenseMatrix, q: DenseMatrix) -> float:
    """sum_ij p log(p/q) with q floored and 0 log 0 = 0."""
    q_floored = np.maximum(q, LOG_FLOOR)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q_floored[mask])))


def _tdist_gradients(z: DenseMatrix, centroids: DenseMatrix, p: DenseMatrix):
    """KL loss and gradients w.r.t. z and centroids; p is a constant target."""
    diff = z[:, None, :] - centroids[None, :, :]
    w = 1.0 / (1.0 + np.sum(diff * diff, axis=2))
    q = w / w.sum(axis=1, keepdims=True)
    loss = kl_divergence(p, q)
    coeff = 2.0 * w * (p - q)  # (n, k)
    d_z = np.sum(coeff[:, :, None] * diff, axis=1)
    d_centroids = -np.sum(coeff[:, :, None] * diff, axis=0)
    return loss, q, d_z, d_centroids


def train_dec_variant(x: DenseMatrix, k: int, config: GcealsConfig, rng: Rng,
                      pretrained: Network | None = None) -> GcealsRun:
    """The t-distribution baseline: ``dec`` trains encoder and centroids on the
    KL loss alone; ``idec`` adds the reconstruction loss weighted against
    gamma * KL. Same pretraining, K-means initialization, and balanced
    batching as the Gaussian-head run; no covariances, weights, or projection
    head, and no weight-collapse stop. Hard labels are the argmax of q.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if config.mode not in (MODE_DEC, MODE_IDEC):
        raise ValueError(f"train_dec_variant needs mode dec or idec, got {config.mode!r}")
    m = config.embedding_dim
    pre_rng, km_rng, _mlp_rng, batch_rng = rng.split(4)
    report = TrainReport()
    if pretrained is None:
        ae, report.pretrain_losses = pretrain_autoencoder(
            x, m, config.pretrain_epochs, config.batch_cap, pre_rng,
            learning_rate=config.learning_rate)
    else:
        ae = pretrained
    pseudo, centroids = _init_from_kmeans(ae, x, k, km_rng)
    bn = ae.plan.bottleneck
    n_layers = ae.plan.n_layers
    uniform = np.full(k, 1.0 / k)

    if config.mode == MODE_IDEC:
        params = ae.params + [centroids]
    else:
        params = ae.encoder_params + [centroids]
    adam = AdamState(params, learning_rate=config.learning_rate)
    for epoch in range(1, config.finetune_epochs + 1):
        idx = balanced_batch(pseudo, config.batch_cap, batch_rng)
        xb = x[idx]
        acts = forward(ae, xb)
        z = acts[bn]
        q = tdist_q(z, centroids)
        p = dec_target(q)
        kl, q, d_z_kl, d_centroids = _tdist_gradients(z, centroids, p)
        mu_before = centroids.copy()
        if config.mode == MODE_IDEC:
            recon = reconstruction_loss(xb, acts[-1])
            dec_grads, d_z_recon = backward_range(
                ae, acts, reconstruction_grad(xb, acts[-1]), bn, n_layers)
            d_z_total = d_z_recon + config.gamma * d_z_kl
            enc_grads, _ = backward_range(ae, acts, d_z_total, 0, bn,
                                          need_input_grad=False)
            grads = enc_grads + dec_grads + [config.gamma * d_centroids]
            total = joint_loss(recon, kl, config.gamma)
        else:
            recon = 0.0
            enc_grads, _ = backward_range(ae, acts, d_z_kl, 0, bn,
                                          need_input_grad=False)
            grads = enc_grads + [d_centroids]
            total = kl
        if not np.isfinite(total):
            raise DivergenceError(epoch, total)
        adam.step(params, grads)

        report.recon_losses.append(recon)
        report.cluster_losses.append(kl)
        report.weight_trace.append(uniform.copy())
        report.centroid_shifts.append(
            np.sqrt(((centroids - mu_before) ** 2).sum(axis=1)))
        report.cov_determinants.append(np.ones(k))
        report.stop_epoch = epoch

    z_full = encode(ae, x)
    q_full = tdist_q(z_full, centroids)
    report.posterior = q_full
    report.hard_labels = np.argmax(q_full, axis=1)
    head = ClusterHead(k=k, means=centroids, log_variances=np.zeros((k, m)),
                       weights=uniform)
    return GcealsRun(autoencoder=ae, head=head, mlp=None, report=report)


def write_embedding_csv(z: DenseMatrix, labels: np.ndarray, path) -> None:
    """Embedding plus hard labels as CSV for external projection/plotting tools."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"z{j}" for j in range(z.shape[1])] + ["label"])
        for row, lab in zip(z, labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])
