use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use log::{debug, info};

use super::config::SessionConfig;
use super::log::{EventLog, EventType, LogEvent};
use super::metrics::{metrics_from_log, summarize, GopMetrics, SessionSummary};
use crate::codec::{
    blend_boundary, downscale_gop, scaled_dims, upscale_gop, BilinearUpscaler, CodecConfig, DctTokenizer, TokenKind,
    Tokenizer, Upscaler,
};
use crate::error::{Error, Result};
use crate::netem::{EmulatedLink, LinkOutcome, MTU};
use crate::rate::{compute_anchors, fit_theta, DeliverySampler, EstimatorState, RateController};
use crate::residual::{aggregate_residual, apply_residual, compute_residual, SparseResidual, DEFAULT_THETA};
use crate::select::{build_drop_mask, token_similarity};
use crate::synth::VideoSource;
use crate::transport::{
    loss_policy, packetize_tokens, reassemble, residual_packet, GopAssembly, LossAction, NackPacket, Packet,
    PacketKind, RESIDUAL_FIXED_BYTES,
};
use crate::video::{boundary_flicker, psnr_from_mse, sequence_mse, Gop, GOP_LEN};

/// Floor on the pacing rate so a zero estimate cannot stall the sender.
const MIN_PACE_BPS: f64 = 8_000.0;
/// Startup ends after this many reports without the estimate growing by
/// `STARTUP_GROWTH` while the sender was filling the estimate.
const STARTUP_ROUNDS: u32 = 3;
const STARTUP_GROWTH: f64 = 1.25;
/// A GoP that uses less than this share of `estimate * gop period` is
/// application limited and says nothing about the path.
const APP_LIMITED_SHARE: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct SessionOutput {
    pub log: EventLog,
    pub metrics: Vec<GopMetrics>,
    pub summary: SessionSummary,
}

/// Streams `src` through the emulated path with the reference tokenizer.
pub fn run_session(src: &dyn VideoSource, cfg: &SessionConfig) -> Result<SessionOutput> {
    run_session_with(src, cfg, &DctTokenizer, &BilinearUpscaler)
}

pub fn run_session_with(
    src: &dyn VideoSource,
    cfg: &SessionConfig,
    tokenizer: &dyn Tokenizer,
    upscaler: &dyn Upscaler,
) -> Result<SessionOutput> {
    cfg.validate()?;
    if src.is_empty() {
        return Err(Error::InvalidParameter("session source holds no frames".into()));
    }
    let mut sim = Sim::new(src, cfg, tokenizer, upscaler)?;
    sim.run()?;
    let log = sim.log;
    let metrics = metrics_from_log(&log)?;
    let summary = summarize(&log, &metrics)?;
    info!(
        "session: {} GoPs, {:.1} fps rendered, {:.1}% on time, {} nacks",
        summary.gops,
        summary.rendered_fps,
        summary.on_time_fraction * 100.0,
        summary.nacks
    );
    Ok(SessionOutput { log, metrics, summary })
}

enum Ev {
    GopReady(u64),
    Pace,
    /// Leading slice of a forward packet still being serialized.
    FwdFragment(usize),
    FwdArrive(Vec<u8>, u64, usize),
    RevArrive(Vec<u8>, u64),
    Deadline(u64),
    Playout(u64),
    ReportTick,
}

struct Scheduled {
    t: u64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        (self.t, self.seq) == (o.t, o.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest (time, seq) first
    fn cmp(&self, o: &Self) -> Ordering {
        (o.t, o.seq).cmp(&(self.t, self.seq))
    }
}

struct Outgoing {
    gop: u64,
    kind: PacketKind,
    row: Option<u16>,
    bytes: Vec<u8>,
    retx: bool,
}

struct Sim<'a> {
    src: &'a dyn VideoSource,
    cfg: &'a SessionConfig,
    tok: &'a dyn Tokenizer,
    up: &'a dyn Upscaler,
    display: (usize, usize),
    fps: f64,
    gops: u64,
    end_ms: u64,
    heap: BinaryHeap<Scheduled>,
    seq: u64,
    log: EventLog,
    next_id: u64,
    fwd: EmulatedLink,
    rev: EmulatedLink,
    // sender
    controller: RateController,
    estimate: f64,
    reports_seen: u64,
    startup: bool,
    full_bw: f64,
    full_rounds: u32,
    last_gop_bytes: usize,
    pacer: VecDeque<Outgoing>,
    pacer_free_at: f64,
    pacer_armed: bool,
    sent: BTreeMap<(u64, u8, u16), Vec<u8>>,
    // receiver
    assemblies: BTreeMap<u64, GopAssembly>,
    decoded_upto: Option<u64>,
    last: Option<(u64, Gop)>,
    sampler: DeliverySampler,
    estimator: EstimatorState,
    measuring: bool,
}

impl<'a> Sim<'a> {
    fn new(
        src: &'a dyn VideoSource,
        cfg: &'a SessionConfig,
        tok: &'a dyn Tokenizer,
        up: &'a dyn Upscaler,
    ) -> Result<Self> {
        let display = src.dims();
        let fps = src.fps();
        let mut frames = src.len();
        if let Some(d) = cfg.duration_ms {
            frames = frames.min((d as f64 * fps / 1000.0).round() as usize);
        }
        if frames == 0 {
            return Err(Error::InvalidParameter("session duration covers no frames".into()));
        }
        let gops = frames.div_ceil(GOP_LEN) as u64;
        let anchors = match cfg.anchors {
            Some(a) => a,
            None => compute_anchors(display, fps, &cfg.codec, RESIDUAL_FIXED_BYTES)?,
        };
        let initial = cfg.initial_bps.unwrap_or(anchors.r_3x);
        let mut sim = Self {
            src,
            cfg,
            tok,
            up,
            display,
            fps,
            gops,
            end_ms: 0,
            heap: BinaryHeap::new(),
            seq: 0,
            log: EventLog::new(),
            next_id: 0,
            fwd: EmulatedLink::new(cfg.forward_trace.clone(), cfg.forward.clone())?,
            rev: EmulatedLink::new(cfg.reverse_trace.clone(), cfg.reverse.clone())?,
            controller: RateController::new(anchors, cfg.hysteresis, initial),
            estimate: initial,
            reports_seen: 0,
            startup: true,
            full_bw: 0.0,
            full_rounds: 0,
            last_gop_bytes: 0,
            pacer: VecDeque::new(),
            pacer_free_at: 0.0,
            pacer_armed: false,
            sent: BTreeMap::new(),
            assemblies: BTreeMap::new(),
            decoded_upto: None,
            last: None,
            sampler: DeliverySampler::default(),
            estimator: EstimatorState::new(cfg.estimator_window, cfg.report_interval_ms),
            measuring: false,
        };
        sim.end_ms = sim.ready_ms(gops - 1) + cfg.tail_ms;
        sim.log.push(
            LogEvent::new(0, EventType::Start)
                .with("width", display.0)
                .with("height", display.1)
                .with("fps", fps)
                .with("gops", gops)
                .with("gop_len", GOP_LEN)
                .with("channels", cfg.codec.channels)
                .with("blend", cfg.codec.blend_width)
                .with("playout_delay_ms", cfg.playout_delay_ms)
                .with("rtt_ms", cfg.rtt_ms())
                .with("r_3x", anchors.r_3x)
                .with("r_2x", anchors.r_2x)
                .with("initial_bps", initial)
                .with("mode", sim.controller.decision().mode.label()),
        );
        Ok(sim)
    }

    /// Capture time of the last frame of GoP `k`.
    fn ready_ms(&self, k: u64) -> u64 {
        ((k + 1) as f64 * GOP_LEN as f64 * 1000.0 / self.fps).round() as u64
    }

    fn at(&mut self, t: u64, ev: Ev) {
        self.heap.push(Scheduled { t, seq: self.seq, ev });
        self.seq += 1;
    }

    fn run(&mut self) -> Result<()> {
        let first = self.ready_ms(0);
        self.at(first, Ev::GopReady(0));
        self.at(self.cfg.report_interval_ms, Ev::ReportTick);
        let mut now = 0;
        while let Some(s) = self.heap.pop() {
            now = s.t;
            match s.ev {
                Ev::GopReady(k) => {
                    self.encode(k, now)?;
                    if k + 1 < self.gops {
                        let t = self.ready_ms(k + 1);
                        self.at(t, Ev::GopReady(k + 1));
                    }
                }
                Ev::Pace => self.pace(now)?,
                Ev::FwdFragment(n) => {
                    self.sampler.on_arrival(now, n);
                    self.measuring = true;
                }
                Ev::FwdArrive(bytes, id, tail) => self.on_forward(bytes, id, now, tail)?,
                Ev::RevArrive(bytes, id) => self.on_reverse(bytes, id, now)?,
                Ev::Deadline(g) => self.on_deadline(g, now)?,
                Ev::Playout(g) => {
                    if self.assemblies.contains_key(&g) {
                        self.decode_upto(g, now, "playout")?;
                    }
                }
                Ev::ReportTick => self.on_report_tick(now)?,
            }
        }
        let f = self.fwd.stats();
        self.log.push(
            LogEvent::new(now, EventType::End)
                .with("delivered", f.delivered)
                .with("loss_dropped", f.loss_dropped)
                .with("queue_dropped", f.queue_dropped)
                .with("switches", self.controller.switches()),
        );
        Ok(())
    }

    // ---- sender ----

    fn encode(&mut self, k: u64, now: u64) -> Result<()> {
        let d = *self.controller.decision();
        let scale = d.scale;
        let codec: CodecConfig = self.cfg.codec.with_scale(scale);
        let gop = self.src.gop(k as usize)?;
        let work = downscale_gop(&gop, scale)?;
        let dims = work.dims();
        let (i, mut p) = self.tok.encode(&work, &codec)?;
        let mut dropped = 0;
        if d.drop_rate > 0.0 {
            let mask = build_drop_mask(&token_similarity(&p, &i)?, d.drop_rate)?;
            dropped = mask.dropped_count();
            p = p.with_dropped(mask.as_slice())?;
        }
        let pi = packetize_tokens(&i, scale)?;
        let pp = packetize_tokens(&p, scale)?;
        // decode exactly what the receiver will see on a clean path
        let (ri, _) = reassemble(&pi, TokenKind::I, i.shape(), k);
        let (rp, _) = reassemble(&pp, TokenKind::P, p.shape(), k);
        let recon = self.tok.decode(&ri, &rp, &codec, dims)?;
        let gop_s = GOP_LEN as f64 / self.fps;
        let spend = (d.residual_budget_bps * self.cfg.budget_headroom * gop_s / 8.0).floor() as usize;
        let window = GOP_LEN as u16;
        let (sr, trials) = if spend > 0 {
            let avg = aggregate_residual(&compute_residual(&work, &recon)?)?;
            let cap = (spend + RESIDUAL_FIXED_BYTES).min(self.cfg.max_residual_bytes);
            let fit = fit_theta(&avg, dims, self.cfg.quant_step, k, window, cap, &self.cfg.ladder)?;
            (fit.residual, fit.trials)
        } else {
            (SparseResidual::empty(k, dims, DEFAULT_THETA, self.cfg.quant_step, window), 0)
        };
        let rp_pkt = residual_packet(&sr, scale)?;

        let mut token_bytes = 0;
        for tp in pi.into_iter().chain(pp) {
            let bytes = Packet::Token(tp.clone()).to_bytes()?;
            token_bytes += bytes.len();
            let kind = PacketKind::from_token(tp.kind);
            self.sent.insert((k, kind as u8, tp.row), bytes.clone());
            self.pacer.push_back(Outgoing { gop: k, kind, row: Some(tp.row), bytes, retx: false });
        }
        let residual_bytes = Packet::Residual(rp_pkt).to_bytes()?;
        let rbytes = residual_bytes.len();
        self.pacer.push_back(Outgoing {
            gop: k,
            kind: PacketKind::Residual,
            row: None,
            bytes: residual_bytes,
            retx: false,
        });
        // retransmissions only matter within a playout delay or so
        let keep_from = k.saturating_sub(4);
        self.sent.retain(|key, _| key.0 >= keep_from);

        self.last_gop_bytes = token_bytes + rbytes;
        debug!("gop {k}: {} scale {scale}, {token_bytes} token + {rbytes} residual bytes", d.mode.label());
        self.log.push(
            LogEvent::new(now, EventType::Encode)
                .gop(k)
                .bytes(token_bytes + rbytes)
                .with("mode", d.mode.label())
                .with("scale", scale)
                .with("drop_rate", d.drop_rate)
                .with("estimate_bps", self.estimate)
                .with("budget_bps", d.residual_budget_bps)
                .with("rows", i.rows())
                .with("dropped", dropped)
                .with("theta", sr.theta())
                .with("residual_samples", sr.sample_count())
                .with("trials", trials)
                .with("token_bytes", token_bytes)
                .with("residual_bytes", rbytes)
                .with("pacer", if self.startup { "startup" } else { "steady" }),
        );
        self.kick_pacer(now);
        Ok(())
    }

    fn kick_pacer(&mut self, now: u64) {
        if !self.pacer_armed && !self.pacer.is_empty() {
            self.pacer_armed = true;
            let t = now.max(self.pacer_free_at.ceil() as u64);
            self.at(t, Ev::Pace);
        }
    }

    fn pace(&mut self, now: u64) -> Result<()> {
        self.pacer_armed = false;
        // unpaced during startup, like an initial window
        let rate = if self.startup {
            f64::INFINITY
        } else {
            (self.estimate * self.cfg.pacing_gain).max(MIN_PACE_BPS)
        };
        let gap = MTU as f64 * 8000.0 / rate;
        let nowf = now as f64;
        if self.pacer_free_at < nowf {
            self.pacer_free_at = nowf;
        }
        while self.pacer_free_at <= nowf {
            let Some(o) = self.pacer.pop_front() else { break };
            self.pacer_free_at += o.bytes.len() as f64 * 8000.0 / rate;
            self.transmit_forward(o, now, gap)?;
        }
        self.kick_pacer(now);
        Ok(())
    }

    /// Startup exit: the estimate has stopped growing while the sender was
    /// offering enough to fill it.
    fn update_startup(&mut self) {
        if !self.startup {
            return;
        }
        if self.estimate >= self.full_bw * STARTUP_GROWTH {
            self.full_bw = self.estimate;
            self.full_rounds = 0;
            return;
        }
        let gop_s = GOP_LEN as f64 / self.fps;
        if self.last_gop_bytes as f64 * 8.0 >= APP_LIMITED_SHARE * self.estimate * gop_s {
            self.full_rounds += 1;
            if self.full_rounds >= STARTUP_ROUNDS {
                self.startup = false;
                info!("pacer leaves startup at {:.0} bps", self.estimate);
            }
        }
    }

    fn transmit_forward(&mut self, o: Outgoing, now: u64, gap: f64) -> Result<()> {
        let id = self.next_id;
        self.next_id += 1;
        let tag = |e: LogEvent| {
            let e = e.gop(o.gop).kind(o.kind.label()).bytes(o.bytes.len()).with("id", id);
            match o.row {
                Some(r) => e.row(r),
                None => e,
            }
        };
        let ev = if o.retx { EventType::Retx } else { EventType::Send };
        let mut send = tag(LogEvent::new(now, ev));
        if gap > 0.0 && o.bytes.len() > MTU {
            send = send.with("unit_gap_ms", gap);
        }
        self.log.push(send);
        match self.fwd.transmit_paced(o.bytes.len(), now, gap)? {
            LinkOutcome::Delivered { at_ms } => {
                // the receiver sees link-sized slices land, not just the final byte
                let frags = self.fwd.fragments().to_vec();
                for &(t, n) in &frags[..frags.len() - 1] {
                    self.at(t, Ev::FwdFragment(n));
                }
                let tail = frags.last().map_or(o.bytes.len(), |f| f.1);
                self.at(at_ms, Ev::FwdArrive(o.bytes, id, tail));
            }
            LinkOutcome::LossDrop => self.log.push(tag(LogEvent::new(now, EventType::Loss))),
            LinkOutcome::QueueDrop => self.log.push(tag(LogEvent::new(now, EventType::Qdrop))),
        }
        Ok(())
    }

    fn on_reverse(&mut self, bytes: Vec<u8>, id: u64, now: u64) -> Result<()> {
        let pkt = Packet::parse(&bytes)?;
        let mut e = LogEvent::new(now, EventType::Arrive)
            .kind(pkt.kind().label())
            .bytes(bytes.len())
            .with("id", id);
        if let Some(g) = pkt.gop_id() {
            e = e.gop(g as u64);
        }
        self.log.push(e);
        match pkt {
            Packet::BwReport(r) => {
                self.estimate = r.bandwidth_bps as f64;
                self.reports_seen += 1;
                self.update_startup();
                if let Some(from) = self.controller.on_report(self.estimate) {
                    let to = self.controller.decision().mode;
                    info!("{now} ms: mode {} -> {} at {} bps", from.label(), to.label(), r.bandwidth_bps);
                    self.log.push(
                        LogEvent::new(now, EventType::Mode)
                            .with("from", from.label())
                            .with("to", to.label())
                            .with("bps", r.bandwidth_bps),
                    );
                }
            }
            Packet::Nack(n) => {
                let g = n.gop_id as u64;
                for &(kind, row) in n.missing.iter().rev() {
                    let kind = PacketKind::from_token(kind);
                    if let Some(b) = self.sent.get(&(g, kind as u8, row)) {
                        self.pacer.push_front(Outgoing { gop: g, kind, row: Some(row), bytes: b.clone(), retx: true });
                    }
                }
                self.kick_pacer(now);
            }
            _ => {}
        }
        Ok(())
    }

    // ---- receiver ----

    fn transmit_reverse(&mut self, pkt: Packet, ev: LogEvent, now: u64) -> Result<()> {
        let bytes = pkt.to_bytes()?;
        let id = self.next_id;
        self.next_id += 1;
        let ev = ev.kind(pkt.kind().label()).bytes(bytes.len()).with("id", id);
        self.log.push(ev.clone());
        let outcome = |t| LogEvent { time_ms: now, event: t, ..ev.clone() };
        match self.rev.transmit(bytes.len(), now)? {
            LinkOutcome::Delivered { at_ms } => self.at(at_ms, Ev::RevArrive(bytes, id)),
            LinkOutcome::LossDrop => self.log.push(outcome(EventType::Loss)),
            LinkOutcome::QueueDrop => self.log.push(outcome(EventType::Qdrop)),
        }
        Ok(())
    }

    fn on_forward(&mut self, bytes: Vec<u8>, id: u64, now: u64, tail_bytes: usize) -> Result<()> {
        self.sampler.on_arrival(now, tail_bytes);
        self.measuring = true;
        let mut e = LogEvent::new(now, EventType::Arrive).bytes(bytes.len()).with("id", id);
        let pkt = match Packet::parse(&bytes) {
            Ok(p) => p,
            Err(err) => {
                self.log.push(e.with("corrupt", err.kind()));
                return Ok(());
            }
        };
        let g = pkt.gop_id().map(u64::from).unwrap_or_default();
        e = e.gop(g).kind(pkt.kind().label());
        if let Packet::Token(tp) = &pkt {
            e = e.row(tp.row);
        }
        if self.decoded_upto.is_some_and(|d| g <= d) {
            self.log.push(e.with("late", 1));
            return Ok(());
        }
        self.log.push(e);
        let scale = match &pkt {
            Packet::Token(tp) => tp.scale,
            Packet::Residual(rp) => rp.scale,
            _ => return Ok(()),
        };
        if !self.assemblies.contains_key(&g) {
            let dims = scaled_dims(self.display, scale);
            let (rows, cols) = CodecConfig::token_grid(dims.0, dims.1);
            let a = GopAssembly::new(
                g,
                scale,
                (rows, cols, self.cfg.codec.channels),
                now,
                self.cfg.playout_delay_ms,
                self.cfg.rtt_ms(),
            );
            self.at(a.deadline_ms(), Ev::Deadline(g));
            self.at(a.playout_ms(), Ev::Playout(g));
            self.assemblies.insert(g, a);
        }
        let a = self.assemblies.get_mut(&g).expect("assembly just ensured");
        let tail = match pkt {
            Packet::Token(tp) => {
                a.insert_token(&tp);
                false
            }
            Packet::Residual(rp) => a.insert_residual(rp),
            _ => false,
        };
        if a.is_complete() {
            self.decode_upto(g, now, "complete")?;
        } else if tail && !a.nacked() {
            // the residual leaves last on a FIFO path: nothing else of this GoP is in flight
            self.settle(g, now, "tail")?;
        }
        Ok(())
    }

    fn on_deadline(&mut self, g: u64, now: u64) -> Result<()> {
        match self.assemblies.get(&g) {
            // after a Nack, wait for the repair or the playout time
            Some(a) if !a.nacked() => self.settle(g, now, "deadline"),
            _ => Ok(()),
        }
    }

    /// Applies the loss policy to a pending GoP.
    fn settle(&mut self, g: u64, now: u64, trigger: &str) -> Result<()> {
        let Some(a) = self.assemblies.get_mut(&g) else { return Ok(()) };
        match loss_policy(a, now, &self.cfg.loss_policy) {
            LossAction::Nack(missing) => {
                a.mark_nacked();
                let n = missing.len();
                let pkt = Packet::Nack(NackPacket { gop_id: g as u32, missing });
                let ev = LogEvent::new(now, EventType::Nack).gop(g).with("rows", n);
                self.transmit_reverse(pkt, ev, now)
            }
            LossAction::Decode { .. } => self.decode_upto(g, now, trigger),
        }
    }

    /// Decodes every pending GoP up to and including `g`, in order.
    fn decode_upto(&mut self, g: u64, now: u64, trigger: &str) -> Result<()> {
        let earlier: Vec<u64> = self.assemblies.range(..g).map(|(k, _)| *k).collect();
        for e in earlier {
            self.decode(e, now, "flush")?;
        }
        self.decode(g, now, trigger)
    }

    fn decode(&mut self, g: u64, now: u64, trigger: &str) -> Result<()> {
        let Some(a) = self.assemblies.remove(&g) else { return Ok(()) };
        let scale = a.scale();
        let codec = self.cfg.codec.with_scale(scale);
        let dims = scaled_dims(self.display, scale);
        let (mi, mp) = a.matrices();
        let mut recon = self.tok.decode(mi, mp, &codec, dims)?;
        let mut residual_applied = false;
        if let Some(Ok(sr)) = a.residual() {
            if let Ok(g2) = apply_residual(&recon, &sr) {
                recon = g2;
                residual_applied = true;
            }
        }
        let shown = upscale_gop(&recon, scale, self.display, self.up)?;
        let n = self.cfg.codec.blend_width;
        let (shown, flicker) = match &self.last {
            Some((pg, prev)) if pg + 1 == g => {
                let b = blend_boundary(prev, &shown, n)?;
                let f = boundary_flicker(prev, &b, n)?;
                (b, Some(f))
            }
            _ => (shown, None),
        };
        let reference = self.src.gop(g as usize)?;
        let psnr = psnr_from_mse(sequence_mse(reference.frames(), shown.frames())?);
        let mut e = LogEvent::new(now, EventType::Decode)
            .gop(g)
            .with("trigger", trigger)
            .with("scale", scale)
            .with("rows_i", a.received_rows(TokenKind::I))
            .with("rows_p", a.received_rows(TokenKind::P))
            .with("residual", residual_applied as u8)
            .with("psnr_db", format!("{psnr:.4}"));
        if let Some(f) = flicker {
            e = e.with("flicker", format!("{f:.6}"));
        }
        self.log.push(e);
        self.decoded_upto = Some(g);
        self.last = Some((g, shown));
        Ok(())
    }

    fn on_report_tick(&mut self, now: u64) -> Result<()> {
        let interval = self.cfg.report_interval_ms;
        let sample = self.sampler.take(interval);
        // nothing to report until the first delivery has been measured
        let report = if self.measuring { self.estimator.push_sample(now, sample) } else { None };
        if let Some(r) = report {
            let ev = LogEvent::new(now, EventType::Report)
                .with("estimate_bps", r.bandwidth_bps)
                .with("sample_bps", sample.round());
            self.transmit_reverse(Packet::BwReport(r), ev, now)?;
        }
        if now + interval <= self.end_ms {
            self.at(now + interval, Ev::ReportTick);
        }
        Ok(())
    }
}
