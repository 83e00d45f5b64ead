//! Downlink models: channels, achievable rates, delays, and energy.
//!
//! A base station with `L` antennas serves `K` single-antenna users. Stream
//! 0 is the shared (common) stream, streams `1..=K` are per-user private
//! streams; a [`TransmitState`] assigns each a power (watts) and a unit-norm
//! beamforming vector. Three access schemes translate a transmit state into
//! achievable rates:
//!
//! * [`rsma_rates`] — rate splitting: every user first decodes the shared
//!   stream (treating all private streams as noise), then its own private
//!   stream (treating the other private streams as noise). The shared rate
//!   is the minimum across users so everyone can decode it.
//! * [`sdma_rates`] — spatial multiplexing only: no shared stream (its
//!   power must be zero; the shared rate reports infinite so a zero-size
//!   shared payload costs nothing).
//! * [`noma_rates`] — superposition with successive interference
//!   cancellation: users are ordered by channel strength; a user decodes
//!   every weaker user's stream before its own, so each stream's rate is
//!   the minimum over its decoders and only stronger streams interfere.
//!
//! [`delays`] and [`energy`] then account one frame: each receiver `k`
//! waits for its payload's compression (cycles from the
//! [`OverheadModel`](crate::compression::OverheadModel) at CPU frequency
//! `f_k`) and for its transmission (`u_k` triples at `2R(2-omega)` bits
//! each over its stream rate). Energy is CPU energy `xi * L1 * f^2` plus
//! radiated energy `p * airtime`.

use std::error::Error;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::compression::{comm_overhead, OverheadModel};

/// Errors from channel construction and link accounting.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkError {
    /// Vector lengths disagree with the channel set.
    DimensionMismatch(String),
    /// A scheme without a shared stream was given shared power.
    NonzeroCommonPower(f64),
    /// A physically meaningless input (negative power, ratio out of range...).
    Invalid(String),
}

impl fmt::Display for LinkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkError::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            LinkError::NonzeroCommonPower(p) => {
                write!(f, "scheme has no shared stream but shared power is {p}")
            }
            LinkError::Invalid(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl Error for LinkError {}

/// Large-scale fading model for generated channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathlossModel {
    /// Unit gain (convenient for unit tests).
    Unit,
    /// Every user at the same distance (kilometres).
    FixedDistanceKm(f64),
    /// User distances drawn uniformly from `[min_m, max_m]` metres.
    UniformAnnulusM { min_m: f64, max_m: f64 },
}

fn pathloss_gain(d_km: f64) -> f64 {
    // 128.1 + 37.6 log10(d) dB attenuation at d kilometres.
    let db = 128.1 + 37.6 * d_km.log10();
    10f64.powf(-db / 10.0)
}

/// Channels of one cell: `channels[k][l]` is user `k`'s coefficient at
/// antenna `l`. Noise power is `noise_density * bandwidth`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub channels: Vec<Vec<Complex64>>,
    pub noise_power: f64,
    pub bandwidth_hz: f64,
    noise_density_w_hz: f64,
    gains: Vec<f64>,
}

impl ChannelSet {
    /// Wrap explicit channel vectors (all the same length, at least one
    /// user). The stored per-user gain is the squared channel norm.
    pub fn from_parts(
        channels: Vec<Vec<Complex64>>,
        noise_power: f64,
        bandwidth_hz: f64,
    ) -> Result<Self, LinkError> {
        if channels.is_empty() {
            return Err(LinkError::DimensionMismatch("no users".into()));
        }
        let l = channels[0].len();
        if l == 0 || channels.iter().any(|h| h.len() != l) {
            return Err(LinkError::DimensionMismatch(
                "channel vectors must share one non-zero antenna count".into(),
            ));
        }
        if noise_power <= 0.0 || bandwidth_hz <= 0.0 {
            return Err(LinkError::Invalid(
                "noise power and bandwidth must be positive".into(),
            ));
        }
        let gains = channels
            .iter()
            .map(|h| h.iter().map(|c| c.norm_sqr()).sum())
            .collect();
        Ok(ChannelSet {
            channels,
            noise_power,
            bandwidth_hz,
            noise_density_w_hz: noise_power / bandwidth_hz,
            gains,
        })
    }

    pub fn users(&self) -> usize {
        self.channels.len()
    }

    pub fn antennas(&self) -> usize {
        self.channels[0].len()
    }

    /// Per-user large-scale gain (pathloss for generated sets, squared norm
    /// for wrapped ones).
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Same fading, different bandwidth: noise power rescales with the
    /// stored density.
    pub fn with_bandwidth(&self, bandwidth_hz: f64) -> Result<Self, LinkError> {
        if bandwidth_hz <= 0.0 {
            return Err(LinkError::Invalid("bandwidth must be positive".into()));
        }
        let mut out = self.clone();
        out.bandwidth_hz = bandwidth_hz;
        out.noise_power = self.noise_density_w_hz * bandwidth_hz;
        Ok(out)
    }
}

/// Draw one cell: per-user pathloss from the model, then circularly
/// symmetric complex Gaussian entries with that variance. Identical seeds
/// give identical channels.
pub fn generate_channels(
    seed: u64,
    users: usize,
    antennas: usize,
    pathloss: &PathlossModel,
    bandwidth_hz: f64,
    noise_dbm_per_hz: f64,
) -> Result<ChannelSet, LinkError> {
    if users == 0 || antennas == 0 {
        return Err(LinkError::DimensionMismatch(
            "need at least one user and one antenna".into(),
        ));
    }
    if bandwidth_hz <= 0.0 {
        return Err(LinkError::Invalid("bandwidth must be positive".into()));
    }
    if let PathlossModel::UniformAnnulusM { min_m, max_m } = pathloss {
        if !(*min_m > 0.0 && max_m >= min_m) {
            return Err(LinkError::Invalid(format!(
                "bad annulus [{min_m}, {max_m}]"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut channels = Vec::with_capacity(users);
    let mut gains = Vec::with_capacity(users);
    for _ in 0..users {
        let rho = match pathloss {
            PathlossModel::Unit => 1.0,
            PathlossModel::FixedDistanceKm(d) => pathloss_gain(*d),
            PathlossModel::UniformAnnulusM { min_m, max_m } => {
                let d_m = min_m + (max_m - min_m) * rng.gen::<f64>();
                pathloss_gain(d_m / 1000.0)
            }
        };
        let scale = (rho / 2.0).sqrt();
        let h: Vec<Complex64> = (0..antennas)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(scale * re, scale * im)
            })
            .collect();
        channels.push(h);
        gains.push(rho);
    }
    let noise_density_w_hz = 10f64.powf((noise_dbm_per_hz - 30.0) / 10.0);
    Ok(ChannelSet {
        channels,
        noise_power: noise_density_w_hz * bandwidth_hz,
        bandwidth_hz,
        noise_density_w_hz,
        gains,
    })
}

/// Powers (watts) and beamformers for streams `0..=K` (0 = shared).
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitState {
    pub powers: Vec<f64>,
    pub beams: Vec<Vec<Complex64>>,
}

impl TransmitState {
    fn validate(&self, ch: &ChannelSet) -> Result<(), LinkError> {
        let k = ch.users();
        if self.powers.len() != k + 1 || self.beams.len() != k + 1 {
            return Err(LinkError::DimensionMismatch(format!(
                "expected {} streams, got {} powers / {} beams",
                k + 1,
                self.powers.len(),
                self.beams.len()
            )));
        }
        if self.beams.iter().any(|w| w.len() != ch.antennas()) {
            return Err(LinkError::DimensionMismatch(
                "beam length differs from antenna count".into(),
            ));
        }
        if self.powers.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(LinkError::Invalid("powers must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Inner product `h^H w`.
pub(crate) fn bf_dot(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Beamforming gain `|h^H w|^2`.
fn bf_gain(h: &[Complex64], w: &[Complex64]) -> f64 {
    bf_dot(h, w).norm_sqr()
}

/// Achievable rates (bits/s) for one transmit state.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Shared-stream rate each user could individually decode.
    pub shared_per_user: Vec<f64>,
    /// Shared-stream rate actually usable (the per-user minimum).
    pub shared: f64,
    /// Private-stream rate per user.
    pub private: Vec<f64>,
}

/// Rate splitting: see the module docs for the decoding model.
pub fn rsma_rates(ch: &ChannelSet, tx: &TransmitState) -> Result<RateReport, LinkError> {
    tx.validate(ch)?;
    let k = ch.users();
    let b = ch.bandwidth_hz;
    let gains: Vec<Vec<f64>> = ch
        .channels
        .iter()
        .map(|h| tx.beams.iter().map(|w| bf_gain(h, w)).collect())
        .collect();
    let mut shared_per_user = Vec::with_capacity(k);
    let mut private = Vec::with_capacity(k);
    for i in 0..k {
        let private_interference: f64 = (1..=k).map(|j| tx.powers[j] * gains[i][j]).sum();
        let shared_sinr = tx.powers[0] * gains[i][0] / (private_interference + ch.noise_power);
        shared_per_user.push(b * (1.0 + shared_sinr).log2());
        let own = tx.powers[i + 1] * gains[i][i + 1];
        let others: f64 = (1..=k)
            .filter(|&j| j != i + 1)
            .map(|j| tx.powers[j] * gains[i][j])
            .sum();
        let sinr = own / (others + ch.noise_power);
        private.push(b * (1.0 + sinr).log2());
    }
    let shared = shared_per_user.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RateReport {
        shared_per_user,
        shared,
        private,
    })
}

/// Spatial multiplexing without a shared stream. Shared power must be zero;
/// the shared rate reports infinite (nothing is ever sent on it).
pub fn sdma_rates(ch: &ChannelSet, tx: &TransmitState) -> Result<RateReport, LinkError> {
    tx.validate(ch)?;
    if tx.powers[0] != 0.0 {
        return Err(LinkError::NonzeroCommonPower(tx.powers[0]));
    }
    let base = rsma_rates(ch, tx)?;
    let k = ch.users();
    Ok(RateReport {
        shared_per_user: vec![f64::INFINITY; k],
        shared: f64::INFINITY,
        private: base.private,
    })
}

/// Successive-decoding rank of each user: squared channel norm descending,
/// index breaking ties. `result[u]` is user `u`'s position; position 0 is
/// the strongest user. The ranking looks at realised channel vectors, not
/// large-scale gains.
pub fn sic_positions(ch: &ChannelSet) -> Vec<usize> {
    let k = ch.users();
    let norms: Vec<f64> = ch
        .channels
        .iter()
        .map(|h| h.iter().map(|c| c.norm_sqr()).sum::<f64>())
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let (na, nb) = (norms[a], norms[b]);
        nb.partial_cmp(&na)
            .expect("finite norms")
            .then(a.cmp(&b))
    });
    let mut pos = vec![0usize; k];
    for (rank, &u) in order.iter().enumerate() {
        pos[u] = rank;
    }
    pos
}

/// Superposition with successive interference cancellation. Users are
/// ordered by squared channel norm (descending, index breaking ties); user
/// `u` decodes every stream of users at or below its own position in that
/// order, so stream `m` is decoded by all users at least as strong as `m`
/// and sees interference only from stronger streams. Shared power must be
/// zero; the shared rate reports infinite.
pub fn noma_rates(ch: &ChannelSet, tx: &TransmitState) -> Result<RateReport, LinkError> {
    tx.validate(ch)?;
    if tx.powers[0] != 0.0 {
        return Err(LinkError::NonzeroCommonPower(tx.powers[0]));
    }
    let k = ch.users();
    let b = ch.bandwidth_hz;
    let gains: Vec<Vec<f64>> = ch
        .channels
        .iter()
        .map(|h| tx.beams.iter().map(|w| bf_gain(h, w)).collect())
        .collect();
    let pos = sic_positions(ch);
    let mut private = vec![0.0; k];
    for m in 0..k {
        // Decoders of stream m: users at rank <= rank of m's owner.
        let mut min_sinr = f64::INFINITY;
        for u in 0..k {
            if pos[u] > pos[m] {
                continue;
            }
            let interference: f64 = (0..k)
                .filter(|&j| pos[j] < pos[m])
                .map(|j| tx.powers[j + 1] * gains[u][j + 1])
                .sum();
            let sinr = tx.powers[m + 1] * gains[u][m + 1] / (interference + ch.noise_power);
            min_sinr = min_sinr.min(sinr);
        }
        private[m] = b * (1.0 + min_sinr).log2();
    }
    Ok(RateReport {
        shared_per_user: vec![f64::INFINITY; k],
        shared: f64::INFINITY,
        private,
    })
}

/// Per-receiver frame delays (seconds), index 0 = shared stream. Receiver
/// delay is compression time plus transmission time:
/// `L1(omega_k)/f_k + u_k * 2R(2-omega_k) / rate_k`. A term with nothing to
/// do (zero cycles, zero triples) contributes zero even when its rate or
/// frequency is zero; a term with work but no capacity is infinite.
pub fn delays(
    report: &RateReport,
    omega: &[f64],
    f: &[f64],
    u: &[u64],
    model: &OverheadModel,
    r_bits: u32,
) -> Result<Vec<f64>, LinkError> {
    let n = report.private.len() + 1;
    if omega.len() != n || f.len() != n || u.len() != n {
        return Err(LinkError::DimensionMismatch(format!(
            "expected {n} entries for omega/f/u"
        )));
    }
    if f.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(LinkError::Invalid("frequencies must be finite and >= 0".into()));
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let bits_per_triple =
            comm_overhead(omega[k], r_bits).map_err(|e| LinkError::Invalid(e.to_string()))?;
        let l1 = model.eval(omega[k]);
        let compute = if l1 <= 0.0 {
            0.0
        } else if f[k] > 0.0 {
            l1 / f[k]
        } else {
            f64::INFINITY
        };
        let rate = if k == 0 {
            report.shared
        } else {
            report.private[k - 1]
        };
        let comm = if u[k] == 0 {
            0.0
        } else if rate > 0.0 {
            u[k] as f64 * bits_per_triple / rate
        } else {
            f64::INFINITY
        };
        out.push(compute + comm);
    }
    Ok(out)
}

/// One frame's energy/delay accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDelayReport {
    pub delays: Vec<f64>,
    /// CPU energy: sum of `xi * L1(omega_k) * f_k^2`.
    pub e1: f64,
    /// Radiated energy: sum of `p_k * airtime_k`.
    pub e2: f64,
    pub total: f64,
}

/// Energy and delays of one frame under a transmit state. CPU energy uses
/// the effective-capacitance constant `xi`; radiated energy charges each
/// stream its power times airtime, where a stream with no payload (or no
/// power) radiates nothing and a stream with payload but zero rate is
/// infinitely expensive.
#[allow(clippy::too_many_arguments)]
pub fn energy(
    tx: &TransmitState,
    report: &RateReport,
    omega: &[f64],
    f: &[f64],
    u: &[u64],
    model: &OverheadModel,
    r_bits: u32,
    xi: f64,
) -> Result<EnergyDelayReport, LinkError> {
    if xi < 0.0 || !xi.is_finite() {
        return Err(LinkError::Invalid("xi must be finite and >= 0".into()));
    }
    let n = report.private.len() + 1;
    if tx.powers.len() != n {
        return Err(LinkError::DimensionMismatch(format!(
            "expected {n} powers"
        )));
    }
    let d = delays(report, omega, f, u, model, r_bits)?;
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for k in 0..n {
        e1 += xi * model.eval(omega[k]) * f[k] * f[k];
        if u[k] == 0 || tx.powers[k] == 0.0 {
            continue;
        }
        let bits_per_triple =
            comm_overhead(omega[k], r_bits).map_err(|e| LinkError::Invalid(e.to_string()))?;
        let rate = if k == 0 {
            report.shared
        } else {
            report.private[k - 1]
        };
        if rate.is_infinite() {
            continue;
        }
        if rate > 0.0 {
            e2 += tx.powers[k] * u[k] as f64 * bits_per_triple / rate;
        } else {
            e2 = f64::INFINITY;
        }
    }
    Ok(EnergyDelayReport {
        delays: d,
        e1,
        e2,
        total: e1 + e2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_user_channel() -> ChannelSet {
        ChannelSet::from_parts(vec![vec![c(1.0, 0.0)]], 1.0, 1e6).unwrap()
    }

    #[test]
    fn unit_sinr_gives_bandwidth_rate() {
        let ch = one_user_channel();
        let tx = TransmitState {
            powers: vec![0.0, 1.0],
            beams: vec![vec![c(0.0, 0.0)], vec![c(1.0, 0.0)]],
        };
        let r = rsma_rates(&ch, &tx).unwrap();
        // SINR = 1 * 1 / (0 + 1) = 1 -> log2(2) = 1 bit/s/Hz.
        assert!((r.private[0] - 1e6).abs() < 1e-6);
        assert_eq!(r.shared_per_user[0], 0.0);
        assert_eq!(r.shared, 0.0);
    }

    #[test]
    fn rsma_matches_direct_formula_on_random_states() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let k = rng.gen_range(1..5usize);
            let l = rng.gen_range(1..4usize);
            let channels: Vec<Vec<Complex64>> = (0..k)
                .map(|_| {
                    (0..l)
                        .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                        .collect()
                })
                .collect();
            let noise = 0.1 + rng.gen::<f64>();
            let bw = 1e6 * (1.0 + rng.gen::<f64>());
            let ch = ChannelSet::from_parts(channels.clone(), noise, bw).unwrap();
            let tx = TransmitState {
                powers: (0..=k).map(|_| rng.gen::<f64>()).collect(),
                beams: (0..=k)
                    .map(|_| {
                        (0..l)
                            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                            .collect()
                    })
                    .collect(),
            };
            let r = rsma_rates(&ch, &tx).unwrap();
            for i in 0..k {
                // Independent recomputation, written out longhand.
                let dot = |h: &[Complex64], w: &[Complex64]| -> Complex64 {
                    let mut acc = c(0.0, 0.0);
                    for (a, b) in h.iter().zip(w.iter()) {
                        acc += a.conj() * b;
                    }
                    acc
                };
                let mut priv_noise = noise;
                for j in 1..=k {
                    priv_noise += tx.powers[j] * dot(&channels[i], &tx.beams[j]).norm_sqr();
                }
                let s = bw
                    * (1.0
                        + tx.powers[0] * dot(&channels[i], &tx.beams[0]).norm_sqr()
                            / priv_noise)
                        .log2();
                assert!((s - r.shared_per_user[i]).abs() <= 1e-12 * s.abs().max(1.0));
                let mut others = noise;
                for j in 1..=k {
                    if j != i + 1 {
                        others += tx.powers[j] * dot(&channels[i], &tx.beams[j]).norm_sqr();
                    }
                }
                let q = bw
                    * (1.0
                        + tx.powers[i + 1] * dot(&channels[i], &tx.beams[i + 1]).norm_sqr()
                            / others)
                        .log2();
                assert!((q - r.private[i]).abs() <= 1e-12 * q.abs().max(1.0));
            }
            let min = r
                .shared_per_user
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert_eq!(min, r.shared);
        }
    }

    #[test]
    fn rates_are_invariant_to_beam_phase() {
        let ch = ChannelSet::from_parts(
            vec![vec![c(0.8, -0.3), c(0.1, 0.4)], vec![c(-0.2, 0.6), c(0.5, 0.0)]],
            0.05,
            2e6,
        )
        .unwrap();
        let base = TransmitState {
            powers: vec![0.4, 0.3, 0.3],
            beams: vec![
                vec![c(0.7, 0.1), c(0.0, 0.7)],
                vec![c(0.6, -0.2), c(0.3, 0.3)],
                vec![c(0.1, 0.0), c(0.9, 0.2)],
            ],
        };
        let r0 = rsma_rates(&ch, &base).unwrap();
        let phase = c(0.0, 1.234).exp();
        let rotated = TransmitState {
            powers: base.powers.clone(),
            beams: base
                .beams
                .iter()
                .map(|w| w.iter().map(|x| x * phase).collect())
                .collect(),
        };
        let r1 = rsma_rates(&ch, &rotated).unwrap();
        for (a, b) in r0.private.iter().zip(r1.private.iter()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        assert!((r0.shared - r1.shared).abs() <= 1e-9 * r0.shared.abs().max(1.0));
    }

    #[test]
    fn sdma_requires_zero_shared_power() {
        let ch = one_user_channel();
        let tx = TransmitState {
            powers: vec![0.1, 1.0],
            beams: vec![vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]],
        };
        assert_eq!(
            sdma_rates(&ch, &tx).unwrap_err(),
            LinkError::NonzeroCommonPower(0.1)
        );
        let ok = TransmitState {
            powers: vec![0.0, 1.0],
            beams: tx.beams.clone(),
        };
        let r = sdma_rates(&ch, &ok).unwrap();
        assert!(r.shared.is_infinite());
        assert!(r.shared_per_user[0].is_infinite());
        assert!((r.private[0] - 1e6).abs() < 1e-6);
    }

    #[test]
    fn noma_two_user_rates_frozen() {
        // Strong user h1 = 2, weak user h2 = 1, sigma^2 = 1, B = 1.
        let ch = ChannelSet::from_parts(
            vec![vec![c(2.0, 0.0)], vec![c(1.0, 0.0)]],
            1.0,
            1.0,
        )
        .unwrap();
        let tx = TransmitState {
            powers: vec![0.0, 1.0, 4.0],
            beams: vec![vec![c(1.0, 0.0)]; 3],
        };
        let r = noma_rates(&ch, &tx).unwrap();
        // Stream 1 (strong user): decoded only by user 1 after cancelling
        // stream 2, SINR = 1*4/1 = 4.
        assert!((r.private[0] - 5f64.log2()).abs() < 1e-12);
        // Stream 2: decoded by both; user 1 sees 4*4/(1*4+1) = 3.2, user 2
        // sees 4*1/(1*1+1) = 2.0; the min (2.0) binds.
        assert!((r.private[1] - 3f64.log2()).abs() < 1e-12);
        assert!(r.shared.is_infinite());
    }

    #[test]
    fn noma_breaks_norm_ties_by_user_index() {
        let ch = ChannelSet::from_parts(
            vec![vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]],
            1.0,
            1.0,
        )
        .unwrap();
        let tx = TransmitState {
            powers: vec![0.0, 1.0, 1.0],
            beams: vec![vec![c(1.0, 0.0)]; 3],
        };
        let r = noma_rates(&ch, &tx).unwrap();
        // Equal norms: user 1 ranks first, so stream 1 is interference-free
        // at user 1 only, and stream 2 is decoded by both users.
        assert!((r.private[0] - 2f64.log2()).abs() < 1e-12);
        // Stream 2 at user 1: 1*1/(1*1+1) = 0.5; at user 2: |i|^2 = 1 for
        // both gains -> 1/(1+1) = 0.5; min = 0.5.
        assert!((r.private[1] - 1.5f64.log2()).abs() < 1e-12);
        assert!(noma_rates(
            &ch,
            &TransmitState {
                powers: vec![0.2, 1.0, 1.0],
                beams: tx.beams.clone(),
            }
        )
        .is_err());
    }

    #[test]
    fn delay_terms_add_compute_and_transmit_time() {
        let model = OverheadModel::single(1000.0, 0.0);
        let report = RateReport {
            shared_per_user: vec![960.0],
            shared: 960.0,
            private: vec![960.0],
        };
        // omega = 0.5: L1 = 500 cycles at 1 kHz -> 0.5 s;
        // 10 triples * 96 bits at 960 b/s -> 1.0 s.
        let d = delays(
            &report,
            &[0.0, 0.5],
            &[0.0, 1000.0],
            &[0, 10],
            &model,
            32,
        )
        .unwrap();
        assert_eq!(d[0], 0.0); // no shared payload, omega 0, L1(0) = 0
        assert!((d[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn delay_zero_and_infinity_rules() {
        let model = OverheadModel::single(1000.0, 0.0);
        let report = RateReport {
            shared_per_user: vec![0.0],
            shared: 0.0,
            private: vec![f64::INFINITY],
        };
        // Shared: payload but zero rate -> infinite. Private: payload at
        // infinite rate -> only the compute term remains.
        let d = delays(
            &report,
            &[0.0, 1.0],
            &[0.0, 500.0],
            &[5, 5],
            &model,
            32,
        )
        .unwrap();
        assert!(d[0].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-12);
        // Work with zero frequency -> infinite compute time.
        let d2 = delays(&report, &[0.0, 1.0], &[0.0, 0.0], &[0, 0], &model, 32).unwrap();
        assert!(d2[1].is_infinite());
        // No work at all -> zero.
        let d3 = delays(
            &report,
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[0, 0],
            &OverheadModel::zero(),
            32,
        )
        .unwrap();
        assert_eq!(d3, vec![0.0, 0.0]);
    }

    #[test]
    fn energy_accounting_frozen_values() {
        let model = OverheadModel::single(1000.0, 0.0);
        let ch = one_user_channel();
        let tx = TransmitState {
            powers: vec![0.0, 2.0],
            beams: vec![vec![c(1.0, 0.0)]; 2],
        };
        let report = RateReport {
            shared_per_user: vec![960.0],
            shared: 960.0,
            private: vec![960.0],
        };
        let e = energy(
            &tx,
            &report,
            &[0.0, 0.5],
            &[0.0, 1000.0],
            &[0, 10],
            &model,
            32,
            1e-28,
        )
        .unwrap();
        // e1 = 1e-28 * 500 * 1000^2 = 5e-20.
        assert!((e.e1 - 5e-20).abs() < 1e-32);
        // e2 = 2 W * (10 * 96 / 960) s = 2 J.
        assert!((e.e2 - 2.0).abs() < 1e-12);
        assert!((e.total - (e.e1 + e.e2)).abs() < 1e-15);
        assert_eq!(ch.users(), 1);
    }

    #[test]
    fn energy_skips_streams_with_nothing_to_send() {
        let model = OverheadModel::zero();
        let tx = TransmitState {
            powers: vec![0.5, 0.0],
            beams: vec![vec![c(1.0, 0.0)]; 2],
        };
        // Shared stream has power but no payload; private has payload but
        // no power. Infinite rates cost nothing.
        let report = RateReport {
            shared_per_user: vec![f64::INFINITY],
            shared: f64::INFINITY,
            private: vec![100.0],
        };
        let e = energy(
            &tx,
            &report,
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[0, 10],
            &model,
            32,
            1e-28,
        )
        .unwrap();
        assert_eq!(e.e2, 0.0);
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn generated_channels_are_deterministic_and_match_pathloss() {
        let a = generate_channels(9, 6, 3, &PathlossModel::Unit, 2e7, -174.0).unwrap();
        let b = generate_channels(9, 6, 3, &PathlossModel::Unit, 2e7, -174.0).unwrap();
        assert_eq!(a.channels, b.channels);
        let c2 = generate_channels(10, 6, 3, &PathlossModel::Unit, 2e7, -174.0).unwrap();
        assert_ne!(a.channels, c2.channels);
        // Noise: -174 dBm/Hz over 20 MHz.
        let density = 10f64.powf(-20.4);
        assert!((a.noise_power / (density * 2e7) - 1.0).abs() < 1e-12);
        assert!(a.gains().iter().all(|&g| g == 1.0));

        // Squared-entry mean matches the pathloss variance.
        let d = generate_channels(3, 4000, 2, &PathlossModel::FixedDistanceKm(0.1), 2e7, -174.0)
            .unwrap();
        let rho = 10f64.powf(-(128.1 + 37.6 * 0.1f64.log10()) / 10.0);
        let mean: f64 = d
            .channels
            .iter()
            .flat_map(|h| h.iter().map(|x| x.norm_sqr()))
            .sum::<f64>()
            / (4000.0 * 2.0);
        assert!(
            (mean / rho - 1.0).abs() < 0.03,
            "mean |h|^2 off by {}",
            (mean / rho - 1.0).abs()
        );

        // Annulus distances stay inside their bounds.
        let e = generate_channels(
            4,
            200,
            2,
            &PathlossModel::UniformAnnulusM {
                min_m: 50.0,
                max_m: 500.0,
            },
            2e7,
            -174.0,
        )
        .unwrap();
        let (lo, hi) = (pathloss_gain(0.5), pathloss_gain(0.05));
        assert!(e.gains().iter().all(|&g| g >= lo && g <= hi));
    }

    #[test]
    fn bandwidth_rescaling_keeps_fading_and_noise_density() {
        let a = generate_channels(9, 3, 2, &PathlossModel::Unit, 2e7, -174.0).unwrap();
        let b = a.with_bandwidth(4e7).unwrap();
        assert_eq!(a.channels, b.channels);
        assert!((b.noise_power / a.noise_power - 2.0).abs() < 1e-12);
        assert_eq!(b.bandwidth_hz, 4e7);
    }

    #[test]
    fn dimension_and_input_validation() {
        let ch = one_user_channel();
        let bad = TransmitState {
            powers: vec![0.0, 1.0, 2.0],
            beams: vec![vec![c(1.0, 0.0)]; 3],
        };
        assert!(rsma_rates(&ch, &bad).is_err());
        let neg = TransmitState {
            powers: vec![0.0, -1.0],
            beams: vec![vec![c(1.0, 0.0)]; 2],
        };
        assert!(rsma_rates(&ch, &neg).is_err());
        assert!(ChannelSet::from_parts(vec![], 1.0, 1.0).is_err());
        assert!(ChannelSet::from_parts(vec![vec![c(1.0, 0.0)], vec![]], 1.0, 1.0).is_err());
        assert!(generate_channels(0, 0, 1, &PathlossModel::Unit, 1.0, -174.0).is_err());
        let report = RateReport {
            shared_per_user: vec![1.0],
            shared: 1.0,
            private: vec![1.0],
        };
        let model = OverheadModel::zero();
        assert!(delays(&report, &[0.0], &[0.0, 0.0], &[0, 0], &model, 32).is_err());
        assert!(delays(&report, &[0.0, 2.0], &[0.0, 0.0], &[0, 0], &model, 32).is_err());
    }
}
