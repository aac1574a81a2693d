use log::{info, warn};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ChannelEqualizer, ChannelModel, EqualizerKind, PilotMode, PnComp, ScenarioConfig, Scheme};
use crate::equalize::{
    adaptive_le_train_with, mmse_le_best_delay, mmse_target_best_delay, modulo, thp_filters_for, EqualizerSet,
};
use crate::error::{invalid, Error, Result};
use crate::link::{
    aggregate_response, channel_pass, gen_rummler_channel, hold_per_symbol, receive_front_end, transmit,
    wiener_pn_with, AggregateResponse, ChannelRealization, Constellation, FrameLayout, Precoder, SymbolFrame,
    SymbolRole,
};
use crate::metrics::{bit_llrs_into, snr_calibrate, wilson_interval, AirAccumulator, TrialResult};
use crate::phasesync::{
    build_phase_trellis, effective_pilot_prior, run_thp_bcjr, run_thp_dpll, EffectivePilotPrior, PhaseTrellis,
    TrackInput,
};
use crate::spectral::{
    check_mask, design_ssf, freq_response, rrc_taps, truncated_rrc_taps, DesignWeights, FilterTaps, MaskReport,
    SpectralMask,
};
use crate::SAMPLE_RATE_HZ;

/// Random-stream purposes; each (purpose, indices) pair maps to its own
/// ChaCha stream under the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamPurpose {
    Channel = 1,
    Data = 2,
    PhaseNoise = 3,
    Noise = 4,
    PilotPrior = 5,
}

/// Index value for stream fields a purpose does not depend on.
pub const ANY: u64 = 0xFFFF;

/// Deterministic RNG for one purpose. Streams differ in the ChaCha stream
/// id, so they never overlap.
pub fn stream_rng(seed: u64, purpose: StreamPurpose, order_bits: u64, snr_index: u64, draw: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ((purpose as u64) << 56) | ((order_bits & 0xFF) << 48) | ((snr_index & 0xFFFF) << 32) | (draw & 0xFFFF_FFFF);
    rng.set_stream(id);
    rng
}

/// Transmit pulse, receive filter and the pulse-only symbol-rate response.
#[derive(Clone, Debug)]
pub struct SchemeFilters {
    pub tx: FilterTaps,
    pub rx: FilterTaps,
    /// `tx * rx` at symbol rate; the channel equalizer target.
    pub reference: AggregateResponse,
    pub mask_report: Option<MaskReport>,
}

fn mask_for(cfg: &ScenarioConfig) -> Result<SpectralMask> {
    match &cfg.filters.mask {
        Some(def) => SpectralMask::from_definition(def, cfg.filters.grid_segments),
        None => Ok(SpectralMask::reference(cfg.filters.grid_segments)),
    }
}

/// Largest gain that keeps `taps` under the mask on the design and
/// verification grids.
pub fn mask_fit_gain(taps: &FilterTaps, mask: &SpectralMask) -> f64 {
    mask.grid()
        .into_iter()
        .chain(mask.verification_grid())
        .map(|f| mask.amplitude(f) / freq_response(taps.coeffs(), f).norm())
        .fold(f64::INFINITY, f64::min)
}

impl SchemeFilters {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        let f = &cfg.filters;
        let sps = cfg.scheme.samples_per_symbol();
        let rx = rrc_taps(f.rrc_beta, f.rrc_span, sps)?;
        let (tx, mask_report) = match cfg.scheme {
            Scheme::Rrc => (rx.clone(), None),
            Scheme::Ssf => {
                let mask = mask_for(cfg)?;
                let design = design_ssf(&mask, &DesignWeights::reference(&mask)?, f.ssf_taps)?;
                let report = check_mask(&design.taps, &mask);
                info!("SSF design: {} iterations, objective {:.6e}", design.iterations, design.objective);
                (design.taps.scaled(std::f64::consts::SQRT_2), Some(report))
            }
            Scheme::RrcWide => {
                let mask = mask_for(cfg)?;
                let t = truncated_rrc_taps(f.rrc_beta, f.wide_taps, sps)?;
                let fitted = t.scaled(mask_fit_gain(&t, &mask));
                let report = check_mask(&fitted, &mask);
                (fitted.scaled(std::f64::consts::SQRT_2), Some(report))
            }
        };
        let reference = aggregate_response(&tx, &[Complex64::new(1.0, 0.0)], &rx)?;
        Ok(Self { tx, rx, reference, mask_report })
    }
}

fn conv(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Phase-corrected (and, with precoding, folded) equalizer output.
fn derotate(stream: &[Complex64], phases: &[f64], delta: Option<f64>) -> Vec<Complex64> {
    stream
        .iter()
        .zip(phases)
        .map(|(s, p)| {
            let z = s * Complex64::from_polar(1.0, -p);
            match delta {
                Some(d) => modulo(z, d),
                None => z,
            }
        })
        .collect()
}

/// Mean squared distance to the nearest constellation point over `idx`.
fn decision_residual(
    stream: &[Complex64],
    phases: &[f64],
    c: &Constellation,
    delta: Option<f64>,
    idx: &[usize],
) -> f64 {
    let soft = derotate(stream, phases, delta);
    idx.iter().map(|&k| (soft[k] - c.slice_point(soft[k])).norm_sqr()).sum::<f64>() / idx.len().max(1) as f64
}

/// Pulse-equalizer filters shared by all channel draws of one point.
fn pulse_filters(kind: EqualizerKind, h: &[Complex64], sigma2: f64, ff: usize, fb: usize) -> Result<EqualizerSet> {
    match kind {
        EqualizerKind::Le => {
            let le = mmse_le_best_delay(h, sigma2, ff)?;
            Ok(EqualizerSet {
                w_hc: vec![Complex64::new(1.0, 0.0)],
                channel_delay: 0,
                w_ht: le.taps,
                b_ht: Vec::new(),
                decision_delay: le.delay,
                sigma2_used: sigma2,
                mse: le.mse,
            })
        }
        _ => thp_filters_for(h, sigma2, ff, fb),
    }
}

fn draw_channel(cfg: &ScenarioConfig, draw: usize) -> Result<ChannelRealization> {
    match &cfg.channel {
        ChannelModel::Flat => Ok(ChannelRealization::flat()),
        ChannelModel::Fixed { depth_db, notch_freq_hz } => gen_rummler_channel(*depth_db, notch_freq_hz / SAMPLE_RATE_HZ),
        ChannelModel::Rummler { stats } => {
            let mut rng = stream_rng(cfg.seed, StreamPurpose::Channel, ANY, ANY, draw as u64);
            stats.draw(&mut rng)
        }
    }
}

/// Aggregated outcome of one sweep point, with diagnostics for the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub scheme: String,
    #[serde(rename = "M")]
    pub order: usize,
    pub snr_db: f64,
    pub errors: u64,
    pub symbols: u64,
    pub ser_ci95: (f64, f64),
    pub air_raw: f64,
    pub failed_draws: usize,
    pub pilot_fallbacks: usize,
    pub lock_losses: usize,
    /// Symbol errors of each channel draw, in draw order.
    pub draw_errors: Vec<u64>,
    /// Mean closed-form post-equalizer noise plus residual ISI.
    pub mean_effective_noise: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutput {
    pub results: Vec<TrialResult>,
    pub points: Vec<PointSummary>,
    pub mask_report: Option<MaskReport>,
}

struct PointSetup {
    order_bits: u64,
    snr_index: usize,
    constellation: Constellation,
    sigma_n2: f64,
    /// Absent for the joint precoder, which is designed per draw.
    pulse: Option<EqualizerSet>,
    prior: Option<EffectivePilotPrior>,
}

#[derive(Clone, Debug, Default)]
struct DrawOutcome {
    errors: u64,
    symbols: u64,
    air: AirAccumulator,
    pilot_fallbacks: usize,
    lock_lost: bool,
    effective_noise: f64,
}

struct DrawChain {
    channel: ChannelRealization,
    full: AggregateResponse,
}

struct Shared<'a> {
    cfg: &'a ScenarioConfig,
    filters: &'a SchemeFilters,
    trellis: Option<PhaseTrellis>,
    sigma_psi2: f64,
    layout: FrameLayout,
}

fn needs_prior(cfg: &ScenarioConfig) -> bool {
    cfg.pn_comp == PnComp::Bcjr && cfg.pilots == PilotMode::Estimated && cfg.equalizer.is_precoded()
}

fn prior_for(
    cfg: &ScenarioConfig,
    c: &Constellation,
    feedback: &[Complex64],
    order_bits: u64,
    snr_index: usize,
    draw: u64,
) -> Result<EffectivePilotPrior> {
    let mut rng = stream_rng(cfg.seed, StreamPurpose::PilotPrior, order_bits, snr_index as u64, draw);
    effective_pilot_prior(c.outer_pilot(), feedback, c, cfg.d_pilot, cfg.prior_draws, &mut rng)
}

impl Shared<'_> {
    fn setup_point(&self, order: usize, snr_index: usize) -> Result<PointSetup> {
        let cfg = self.cfg;
        let constellation = Constellation::new(order)?;
        let order_bits = order.trailing_zeros() as u64;
        let snr_db = cfg.snr_db[snr_index];
        let sigma_n2 = snr_calibrate(1.0, snr_db)?;
        let ff = cfg.filters.ff_len_for(cfg.scheme);
        let pulse = match cfg.equalizer {
            EqualizerKind::ThpJoint => None,
            kind => Some(pulse_filters(kind, &self.filters.reference.taps, sigma_n2, ff, cfg.filters.fb_len)?),
        };
        let prior = match (&pulse, needs_prior(cfg)) {
            (Some(p), true) => Some(prior_for(cfg, &constellation, &p.b_ht, order_bits, snr_index, ANY)?),
            _ => None,
        };
        Ok(PointSetup { order_bits, snr_index, constellation, sigma_n2, pulse, prior })
    }

    fn run_draw(&self, point: &PointSetup, chain: &DrawChain, draw: usize) -> Result<DrawOutcome> {
        let cfg = self.cfg;
        let c = &point.constellation;
        let sps = cfg.scheme.samples_per_symbol();
        let bits = point.order_bits;
        let precoded = cfg.equalizer.is_precoded();
        let delta = c.delta();

        let mut data_rng = stream_rng(cfg.seed, StreamPurpose::Data, bits, ANY, draw as u64);
        let frame = SymbolFrame::random(c, &self.layout, sps, &mut data_rng)?;
        let n = frame.len();

        // Equalizer for this draw.
        let h_full = &chain.full.taps;
        let (mut eq, joint_prior) = match &point.pulse {
            Some(p) => (p.clone(), None),
            None => {
                let ff = cfg.filters.ff_len_for(cfg.scheme);
                let eq = thp_filters_for(h_full, point.sigma_n2, ff, cfg.filters.fb_len)?;
                let prior = if needs_prior(cfg) {
                    Some(prior_for(cfg, c, &eq.b_ht, bits, point.snr_index, draw as u64)?)
                } else {
                    None
                };
                (eq, prior)
            }
        };

        let precoder = precoded.then(|| Precoder { feedback: &eq.b_ht, delta });
        let tx = transmit(&frame, &self.filters.tx, precoder)?;
        let u: Vec<Complex64> = if precoded {
            frame.symbols.iter().zip(&tx.displacements).map(|(a, d)| a + d).collect()
        } else {
            frame.symbols.clone()
        };

        let out_len = tx.waveform.samples.len() + chain.channel.taps.len() - 1;
        let pn = if self.sigma_psi2 > 0.0 {
            let mut pn_rng = stream_rng(cfg.seed, StreamPurpose::PhaseNoise, ANY, ANY, draw as u64);
            let phases = wiener_pn_with(&mut pn_rng, self.sigma_psi2, out_len.div_ceil(sps as usize) + 1);
            hold_per_symbol(&phases, sps, out_len)
        } else {
            vec![0.0; out_len]
        };
        let mut noise_rng = stream_rng(cfg.seed, StreamPurpose::Noise, bits, point.snr_index as u64, draw as u64);
        let rx = channel_pass(&tx.waveform, &chain.channel, &pn, point.sigma_n2, &mut noise_rng)?;
        let y = receive_front_end(&rx, &self.filters.rx, sps, chain.full.timing_offset)?;
        let lead = chain.full.lead;
        let yk = |k: usize| y.get(k + lead).copied().unwrap_or_default();

        if cfg.equalizer != EqualizerKind::ThpJoint {
            let reference = &self.filters.reference.taps;
            let (w_hc, delay) = match &cfg.filters.channel_equalizer {
                ChannelEqualizer::Mmse => {
                    let le = mmse_target_best_delay(h_full, reference, point.sigma_n2, cfg.filters.channel_le_len)?;
                    (le.taps, le.delay)
                }
                ChannelEqualizer::Lms { step, passes } => {
                    let t = cfg.training_len;
                    let shaped: Vec<Complex64> = conv(&tx.channel_symbols[..t], reference)[..t].to_vec();
                    let received: Vec<Complex64> = (0..t).map(yk).collect();
                    let delay = cfg.filters.channel_le_len / 2;
                    let w = adaptive_le_train_with(&received, &shaped, cfg.filters.channel_le_len, *step, delay, *passes)?;
                    (w, delay)
                }
            };
            eq.w_hc = w_hc;
            eq.channel_delay = delay;
        }

        // Combined receive filter and its calibrated cursor.
        let f = conv(&eq.w_hc, &eq.w_ht);
        let d_total = eq.total_delay();
        let cascade = conv(h_full, &f);
        let g = *cascade.get(d_total).ok_or_else(|| invalid("decision delay outside the cascade"))?;
        if g.norm() == 0.0 {
            return Err(Error::Singular("equalized cursor is zero".into()));
        }
        let x_power = if precoded { c.order() as f64 / (c.order() as f64 - 1.0) } else { 1.0 };
        let uses_fb = cfg.equalizer != EqualizerKind::Le;
        let isi: f64 = cascade
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let target = if i == d_total {
                    Complex64::new(1.0, 0.0)
                } else if uses_fb && i > d_total && i - d_total <= eq.b_ht.len() {
                    eq.b_ht[i - d_total - 1]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                (v / g - target).norm_sqr()
            })
            .sum::<f64>()
            * x_power;
        let f_energy: f64 = f.iter().map(|v| v.norm_sqr()).sum();
        let effective_noise = (point.sigma_n2 * f_energy / g.norm_sqr() + isi).max(1e-18);

        let inv_g = 1.0 / g;
        let stream: Vec<Complex64> = (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, fi) in f.iter().enumerate() {
                    if let Some(idx) = (k + d_total).checked_sub(i) {
                        acc += fi * yk(idx);
                    }
                }
                acc * inv_g
            })
            .collect();

        let data_idx = frame.indices(SymbolRole::Data);
        let mut outcome = DrawOutcome { effective_noise, air: AirAccumulator::new(c.bits_per_symbol() as usize), ..Default::default() };
        let (decisions, soft): (Vec<u32>, Vec<Complex64>) = if cfg.equalizer == EqualizerKind::Dfe {
            let mut past: Vec<Complex64> = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            let mut soft = Vec::with_capacity(n);
            for k in 0..n {
                let mut v = stream[k];
                for (j, b) in eq.b_ht.iter().enumerate() {
                    if j + 1 > k {
                        break;
                    }
                    v -= b * past[k - j - 1];
                }
                let label = c.slice(v);
                past.push(c.point(label));
                labels.push(label);
                soft.push(v);
            }
            (labels, soft)
        } else {
            let d = precoded.then_some(delta);
            let pilot_idx = frame.indices(SymbolRole::Pilot);
            let known: Vec<Complex64> = pilot_idx.iter().map(|&k| u[k]).collect();
            let input = TrackInput {
                stream: &stream,
                roles: &frame.roles,
                training: &u[..cfg.training_len.min(n)],
                pilot: c.point(frame.pilot_label),
                known_pilots: (cfg.pilots == PilotMode::Known).then_some(known.as_slice()),
                delta: d,
            };
            let phases = match cfg.pn_comp {
                PnComp::None => vec![0.0; n],
                PnComp::Dpll => {
                    let track = run_thp_dpll(&input, c, &cfg.dpll)?;
                    outcome.lock_lost = track.lock_lost_at.is_some();
                    track.phases
                }
                PnComp::Bcjr => {
                    let trellis = self.trellis.as_ref().expect("trellis built for BCJR");
                    let point_mass;
                    let prior = match (point.prior.as_ref(), joint_prior.as_ref()) {
                        (Some(p), _) | (None, Some(p)) => p,
                        (None, None) => {
                            point_mass = EffectivePilotPrior::point_mass(input.pilot, delta);
                            &point_mass
                        }
                    };
                    let mut sigma2 = effective_noise;
                    let mut track = run_thp_bcjr(&input, c, trellis, prior, sigma2, &cfg.bcjr)?;
                    for _ in 0..cfg.bcjr.noise_refinements {
                        let measured = decision_residual(&stream, &track.phases, c, d, &data_idx);
                        if measured <= sigma2 {
                            break;
                        }
                        sigma2 = measured;
                        track = run_thp_bcjr(&input, c, trellis, prior, sigma2, &cfg.bcjr)?;
                    }
                    outcome.pilot_fallbacks = track.pilot_fallbacks;
                    track.phases
                }
            };
            let soft = derotate(&stream, &phases, d);
            (soft.iter().map(|v| c.slice(*v)).collect(), soft)
        };

        let data = data_idx;
        let resid: f64 = data.iter().map(|&k| (soft[k] - c.slice_point(soft[k])).norm_sqr()).sum::<f64>()
            / data.len() as f64;
        let llr_sigma2 = resid.max(1e-15);
        let m = c.bits_per_symbol() as usize;
        let mut llrs = vec![0.0; m];
        let mut bitbuf = vec![0u8; m];
        for &k in &data {
            if decisions[k] != frame.labels[k] {
                outcome.errors += 1;
            }
            bit_llrs_into(soft[k], c, llr_sigma2, &mut llrs)?;
            for (b, slot) in bitbuf.iter_mut().enumerate() {
                *slot = c.bit(frame.labels[k], b as u32);
            }
            outcome.air.push(&llrs, &bitbuf)?;
        }
        outcome.symbols = data.len() as u64;
        Ok(outcome)
    }
}

/// Runs every (constellation, SNR, channel draw) combination and aggregates
/// per sweep point. Results are ordered by constellation, then SNR.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let filters = SchemeFilters::build(cfg)?;
    let sigma_psi2 = cfg.sigma_psi2();
    let trellis = if cfg.pn_comp == PnComp::Bcjr {
        Some(build_phase_trellis(sigma_psi2, cfg.d_pilot, cfg.bcjr.num_levels, cfg.bcjr.span_factor)?)
    } else {
        None
    };
    let per_draw = cfg.n_symbols.div_ceil(cfg.n_channels);
    let layout = FrameLayout {
        training_len: if cfg.uses_pilots() || matches!(cfg.filters.channel_equalizer, ChannelEqualizer::Lms { .. }) {
            cfg.training_len
        } else {
            0
        },
        pilot_period: cfg.uses_pilots().then_some(cfg.d_pilot),
        data_len: per_draw,
        guard_len: 0,
    };
    let shared = Shared { cfg, filters: &filters, trellis, sigma_psi2, layout };

    let chains: Vec<Result<DrawChain>> = (0..cfg.n_channels)
        .into_par_iter()
        .map(|d| {
            let channel = draw_channel(cfg, d)?;
            let full = aggregate_response(&filters.tx, &channel.taps, &filters.rx)?;
            Ok(DrawChain { channel, full })
        })
        .collect();
    let chains: Vec<DrawChain> = chains.into_iter().collect::<Result<_>>()?;

    let grid: Vec<(usize, usize)> =
        cfg.orders.iter().flat_map(|&m| (0..cfg.snr_db.len()).map(move |s| (m, s))).collect();
    let setups: Vec<Result<PointSetup>> = grid.par_iter().map(|&(m, s)| shared.setup_point(m, s)).collect();

    let tasks: Vec<(usize, usize)> =
        (0..grid.len()).flat_map(|p| (0..cfg.n_channels).map(move |d| (p, d))).collect();
    let outcomes: Vec<Result<DrawOutcome>> = tasks
        .par_iter()
        .map(|&(p, d)| match &setups[p] {
            Ok(setup) => shared.run_draw(setup, &chains[d], d),
            Err(_) => Err(invalid("point setup failed")),
        })
        .collect();

    let id = cfg.scheme_id();
    let mut results = Vec::new();
    let mut points = Vec::new();
    for (p, &(order, s)) in grid.iter().enumerate() {
        let snr_db = cfg.snr_db[s];
        let draws = &outcomes[p * cfg.n_channels..(p + 1) * cfg.n_channels];
        let bits = order.trailing_zeros() as usize;
        let mut acc = AirAccumulator::new(bits);
        let (mut errors, mut symbols, mut failed, mut fallbacks, mut losses, mut noise) = (0, 0, 0, 0, 0, 0.0);
        let mut draw_errors = Vec::with_capacity(draws.len());
        let mut first_error = match &setups[p] {
            Err(e) => Some(e.to_string()),
            Ok(_) => None,
        };
        for o in draws {
            match o {
                Ok(o) => {
                    draw_errors.push(o.errors);
                    errors += o.errors;
                    symbols += o.symbols;
                    acc.merge(&o.air);
                    fallbacks += o.pilot_fallbacks;
                    losses += o.lock_lost as usize;
                    noise += o.effective_noise;
                }
                Err(e) => {
                    draw_errors.push(0);
                    failed += 1;
                    first_error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        let ok = cfg.n_channels - failed;
        if failed > 0 {
            warn!("{id} M={order} snr={snr_db}: {failed} draw(s) failed: {}", first_error.as_deref().unwrap_or(""));
        }
        if failed == 0 && symbols > 0 {
            let ser = errors as f64 / symbols as f64;
            let air = acc.reported();
            results.push(TrialResult {
                scheme: id.clone(),
                order,
                snr_db,
                ser,
                air_bpcu: air,
                air_mbps: air * cfg.scheme.symbol_rate() / 1e6,
                n_symbols: symbols,
                seed: cfg.seed,
            });
        }
        points.push(PointSummary {
            scheme: id.clone(),
            order,
            snr_db,
            errors,
            symbols,
            ser_ci95: wilson_interval(errors, symbols),
            air_raw: acc.raw(),
            failed_draws: failed,
            pilot_fallbacks: fallbacks,
            lock_losses: losses,
            draw_errors,
            mean_effective_noise: if ok > 0 { noise / ok as f64 } else { f64::NAN },
            error: first_error,
        });
    }
    Ok(ScenarioOutput { results, points, mask_report: filters.mask_report.clone() })
}
