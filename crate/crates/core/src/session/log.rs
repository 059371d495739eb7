use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    /// Session parameters, logged once at time zero.
    Start,
    /// Sender tokenized a GoP and queued its packets.
    Encode,
    Send,
    Retx,
    /// Bernoulli loss on the link.
    Loss,
    /// Drop-tail queue overflow.
    Qdrop,
    Arrive,
    /// Receiver sent a retransmission request.
    Nack,
    /// Receiver sent a bandwidth report.
    Report,
    /// Sender changed operating mode.
    Mode,
    Decode,
    End,
}

/// One row of the event log.
///
/// `detail` holds extra `key=value` pairs separated by `;`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub time_ms: u64,
    pub event: EventType,
    pub gop_id: Option<u64>,
    pub kind: Option<String>,
    pub row: Option<u16>,
    pub bytes: usize,
    pub detail: String,
}

impl LogEvent {
    pub fn new(time_ms: u64, event: EventType) -> Self {
        Self {
            time_ms,
            event,
            gop_id: None,
            kind: None,
            row: None,
            bytes: 0,
            detail: String::new(),
        }
    }

    pub fn gop(mut self, gop_id: u64) -> Self {
        self.gop_id = Some(gop_id);
        self
    }

    pub fn kind(mut self, kind: &str) -> Self {
        self.kind = Some(kind.to_string());
        self
    }

    pub fn row(mut self, row: u16) -> Self {
        self.row = Some(row);
        self
    }

    pub fn bytes(mut self, bytes: usize) -> Self {
        self.bytes = bytes;
        self
    }

    /// Appends one `key=value` pair.
    pub fn with(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        if !self.detail.is_empty() {
            self.detail.push(';');
        }
        let _ = write!(self.detail, "{key}={value}");
        self
    }

    pub fn details(&self) -> BTreeMap<&str, &str> {
        self.detail
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .collect()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.detail
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    /// Parses detail `key`, failing when absent or malformed.
    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::InvalidParameter(format!("{:?} event at {} lacks {key}", self.event, self.time_ms)))?;
        raw.parse()
            .map_err(|_| Error::InvalidParameter(format!("{:?} event at {}: bad {key}={raw}", self.event, self.time_ms)))
    }

    /// Packet sequence number carried by send, outcome and feedback rows.
    pub fn packet_id(&self) -> Option<u64> {
        self.get("id").and_then(|v| v.parse().ok())
    }
}

/// Time-ordered session record; the only input metric reporting reads.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    events: Vec<LogEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: LogEvent) {
        debug_assert!(self.events.last().is_none_or(|l| l.time_ms <= e.time_ms));
        self.events.push(e);
    }

    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of(&self, t: EventType) -> impl Iterator<Item = &LogEvent> {
        self.events.iter().filter(move |e| e.event == t)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for e in &self.events {
            wr.serialize(e).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::InvalidParameter(format!("event log write: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let events = rd.deserialize().collect::<std::result::Result<Vec<LogEvent>, _>>().map_err(csv_err)?;
        Ok(Self { events })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("event log csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut log = EventLog::new();
        log.push(LogEvent::new(0, EventType::Start).with("fps", 30).with("width", 64));
        log.push(LogEvent::new(5, EventType::Send).gop(0).kind("I").row(3).bytes(120).with("id", 0));
        log.push(LogEvent::new(25, EventType::Arrive).gop(0).kind("I").row(3).bytes(120).with("id", 0));
        let text = log.to_csv_string().unwrap();
        assert!(text.starts_with("time_ms,event,gop_id,kind,row,bytes,detail\n"));
        assert!(text.contains("5,send,0,I,3,120,id=0\n"));
        let back = EventLog::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.events()[0].parse::<f64>("fps").unwrap(), 30.0);
        assert_eq!(back.events()[2].packet_id(), Some(0));
        assert!(back.events()[0].parse::<u32>("height").is_err());
    }
}
