use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::ON_TIME_MS;
use super::log::{EventLog, EventType, LogEvent};
use crate::error::{Error, Result};
use crate::netem::MTU;

/// One row of the per-GoP metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GopMetrics {
    pub gop_id: u64,
    /// Capture time of the GoP's last frame.
    pub time_ms: u64,
    pub mode: String,
    pub scale: u8,
    pub drop_rate: f64,
    pub sent_bps: f64,
    pub estimated_bps: f64,
    pub rows_lost: usize,
    pub nacks: usize,
    pub psnr_db: Option<f64>,
    pub boundary_flicker: Option<f64>,
    pub frame_delay_ms: Option<u64>,
    pub rendered_fps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub gops: usize,
    pub decoded: usize,
    pub target_fps: f64,
    pub rendered_fps: f64,
    /// Share of GoPs decoded within the on-time bound of capture.
    pub on_time_fraction: f64,
    pub mean_psnr_db: Option<f64>,
    pub nacks: usize,
    pub retransmissions: usize,
    pub rows_lost: usize,
    pub mode_switches: usize,
    pub sent: usize,
    pub arrived: usize,
    pub loss_dropped: usize,
    pub queue_dropped: usize,
}

struct Acc<'a> {
    encode: &'a LogEvent,
    sent_bytes: usize,
    received: BTreeSet<(String, u16)>,
    at_decode: Option<(&'a LogEvent, usize)>,
    nacks: usize,
}

fn start_event(log: &EventLog) -> Result<&LogEvent> {
    log.of(EventType::Start)
        .next()
        .ok_or_else(|| Error::InvalidParameter("event log has no start event".into()))
}

/// Rebuilds the per-GoP table from the event log alone.
pub fn metrics_from_log(log: &EventLog) -> Result<Vec<GopMetrics>> {
    let start = start_event(log)?;
    let fps: f64 = start.parse("fps")?;
    let gop_len: usize = start.parse("gop_len")?;
    let gop_s = gop_len as f64 / fps;
    let mut accs: BTreeMap<u64, Acc> = BTreeMap::new();
    for e in log.events() {
        let Some(g) = e.gop_id else { continue };
        if e.event == EventType::Encode {
            accs.insert(
                g,
                Acc {
                    encode: e,
                    sent_bytes: 0,
                    received: BTreeSet::new(),
                    at_decode: None,
                    nacks: 0,
                },
            );
            continue;
        }
        let Some(a) = accs.get_mut(&g) else { continue };
        match e.event {
            EventType::Send | EventType::Retx => a.sent_bytes += e.bytes,
            EventType::Arrive if a.at_decode.is_none() => {
                if let (Some(k), Some(r)) = (&e.kind, e.row) {
                    a.received.insert((k.clone(), r));
                }
            }
            EventType::Nack => a.nacks += 1,
            EventType::Decode => a.at_decode = Some((e, a.received.len())),
            _ => {}
        }
    }
    accs.into_iter()
        .map(|(g, a)| {
            let enc = a.encode;
            let rows: usize = enc.parse("rows")?;
            let received = a.at_decode.map_or(a.received.len(), |(_, n)| n);
            let (psnr_db, boundary_flicker, delay, rendered) = match a.at_decode {
                Some((d, _)) => {
                    let valid: usize = d.parse::<usize>("rows_i")? + d.parse::<usize>("rows_p")?;
                    let flicker = match d.get("flicker") {
                        Some(_) => Some(d.parse("flicker")?),
                        None => None,
                    };
                    (
                        Some(d.parse("psnr_db")?),
                        flicker,
                        Some(d.time_ms - enc.time_ms),
                        if valid > 0 { fps } else { 0.0 },
                    )
                }
                None => (None, None, None, 0.0),
            };
            Ok(GopMetrics {
                gop_id: g,
                time_ms: enc.time_ms,
                mode: enc.parse("mode")?,
                scale: enc.parse("scale")?,
                drop_rate: enc.parse("drop_rate")?,
                sent_bps: a.sent_bytes as f64 * 8.0 / gop_s,
                estimated_bps: enc.parse("estimate_bps")?,
                rows_lost: (2 * rows).saturating_sub(received),
                nacks: a.nacks,
                psnr_db,
                boundary_flicker,
                frame_delay_ms: delay,
                rendered_fps: rendered,
            })
        })
        .collect()
}

pub fn summarize(log: &EventLog, metrics: &[GopMetrics]) -> Result<SessionSummary> {
    let fps: f64 = start_event(log)?.parse("fps")?;
    let n = metrics.len().max(1) as f64;
    let psnrs: Vec<f64> = metrics.iter().filter_map(|m| m.psnr_db).collect();
    let count = |t: EventType| log.of(t).count();
    Ok(SessionSummary {
        gops: metrics.len(),
        decoded: metrics.iter().filter(|m| m.frame_delay_ms.is_some()).count(),
        target_fps: fps,
        rendered_fps: metrics.iter().map(|m| m.rendered_fps).sum::<f64>() / n,
        on_time_fraction: metrics
            .iter()
            .filter(|m| m.frame_delay_ms.is_some_and(|d| d <= ON_TIME_MS))
            .count() as f64
            / n,
        mean_psnr_db: (!psnrs.is_empty()).then(|| psnrs.iter().sum::<f64>() / psnrs.len() as f64),
        nacks: count(EventType::Nack),
        retransmissions: count(EventType::Retx),
        rows_lost: metrics.iter().map(|m| m.rows_lost).sum(),
        mode_switches: count(EventType::Mode),
        sent: count(EventType::Send) + count(EventType::Retx) + count(EventType::Nack) + count(EventType::Report),
        arrived: count(EventType::Arrive),
        loss_dropped: count(EventType::Loss),
        queue_dropped: count(EventType::Qdrop),
    })
}

pub fn write_metrics_csv<W: Write>(w: W, metrics: &[GopMetrics]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for m in metrics {
        wr.serialize(m)
            .map_err(|e| Error::InvalidParameter(format!("metrics csv: {e}")))?;
    }
    wr.flush().map_err(|e| Error::InvalidParameter(format!("metrics csv: {e}")))?;
    Ok(())
}

pub fn metrics_csv_string(metrics: &[GopMetrics]) -> Result<String> {
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, metrics)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Sender-side rate over one fixed window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateWindow {
    pub start_ms: u64,
    pub end_ms: u64,
    /// Forward bytes handed to the link, retransmissions included. Paced
    /// packets count each MTU unit when it left the sender.
    pub sent_bps: f64,
    /// Time-weighted mean of the estimate the sender held.
    pub estimate_bps: f64,
}

/// Splits `[0, until_ms)` into `window_ms` windows.
pub fn rate_windows(log: &EventLog, window_ms: u64, until_ms: u64) -> Result<Vec<RateWindow>> {
    if window_ms == 0 {
        return Err(Error::InvalidParameter("window must be positive".into()));
    }
    let initial: f64 = start_event(log)?.parse("initial_bps")?;
    let mut reported: HashMap<u64, f64> = HashMap::new();
    let mut steps = vec![(0u64, initial)];
    let mut sends = Vec::new();
    for e in log.events() {
        match e.event {
            EventType::Report => {
                if let Some(id) = e.packet_id() {
                    reported.insert(id, e.parse("estimate_bps")?);
                }
            }
            EventType::Arrive => {
                if let Some(v) = e.packet_id().and_then(|id| reported.get(&id)) {
                    steps.push((e.time_ms, *v));
                }
            }
            EventType::Send | EventType::Retx => {
                let gap: f64 = match e.get("unit_gap_ms") {
                    Some(_) => e.parse("unit_gap_ms")?,
                    None => 0.0,
                };
                let mut left = e.bytes;
                let mut k = 0u64;
                while left > 0 {
                    let n = left.min(MTU);
                    sends.push((e.time_ms + (k as f64 * gap).floor() as u64, n));
                    left -= n;
                    k += 1;
                }
            }
            _ => {}
        }
    }
    let value_at = |t: u64| steps.iter().rev().find(|s| s.0 <= t).map_or(initial, |s| s.1);
    let mut out = Vec::new();
    let mut s = 0;
    while s + window_ms <= until_ms {
        let e = s + window_ms;
        let bytes: usize = sends.iter().filter(|(t, _)| *t >= s && *t < e).map(|x| x.1).sum();
        // integrate the step function over the window
        let mut area = 0.0;
        let mut t = s;
        let mut v = value_at(s);
        for &(ts, sv) in steps.iter().filter(|x| x.0 > s && x.0 < e) {
            area += v * (ts - t) as f64;
            t = ts;
            v = sv;
        }
        area += v * (e - t) as f64;
        out.push(RateWindow {
            start_ms: s,
            end_ms: e,
            sent_bps: bytes as f64 * 8000.0 / window_ms as f64,
            estimate_bps: area / window_ms as f64,
        });
        s = e;
    }
    Ok(out)
}
