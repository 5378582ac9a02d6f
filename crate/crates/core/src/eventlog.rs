//! On-disk formats for jump paths and coupled runs.
//!
//! Binary event log, all little-endian:
//!
//! ```text
//! k: u32 | N: u64 | T: f64 | seed: u64 | initial counts: k × u32
//! then per event: time: f64 | type: u16 (one-based) | direction: i8
//! ```

use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::coupling::CoupledRun;
use crate::error::{Error, Result};
use crate::jump::{EventSink, JumpEvent, JumpPath};

const EVENT_BYTES: usize = 8 + 2 + 1;

fn write_header<W: Write>(w: &mut W, n: u32, horizon: f64, seed: u64, initial: &[u32]) -> io::Result<()> {
    w.write_all(&(initial.len() as u32).to_le_bytes())?;
    w.write_all(&u64::from(n).to_le_bytes())?;
    w.write_all(&horizon.to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    for c in initial {
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

fn encode(event: &JumpEvent) -> [u8; EVENT_BYTES] {
    let mut buf = [0u8; EVENT_BYTES];
    buf[..8].copy_from_slice(&event.time.to_le_bytes());
    buf[8..10].copy_from_slice(&(event.type_index + 1).to_le_bytes());
    buf[10] = event.direction as u8;
    buf
}

/// Streams events to a binary log as they are produced.
pub struct EventLogWriter<W: Write> {
    out: BufWriter<W>,
    k: usize,
    events: u64,
}

impl<W: Write> EventLogWriter<W> {
    pub fn new(out: W, n: u32, horizon: f64, seed: u64, initial: &[u32]) -> Result<Self> {
        let mut out = BufWriter::new(out);
        write_header(&mut out, n, horizon, seed, initial)?;
        Ok(Self {
            out,
            k: initial.len(),
            events: 0,
        })
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        self.out
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

impl<W: Write> EventSink for EventLogWriter<W> {
    fn record(&mut self, event: JumpEvent) -> Result<()> {
        if usize::from(event.type_index) >= self.k {
            return Err(Error::Input(format!("event type {} out of range", event.type_index)));
        }
        self.out.write_all(&encode(&event))?;
        self.events += 1;
        Ok(())
    }
}

pub fn write_event_log<W: Write>(path: &JumpPath, out: W) -> Result<()> {
    let mut w = EventLogWriter::new(out, path.n, path.horizon, path.seed, &path.initial_counts)?;
    for e in &path.events {
        w.record(*e)?;
    }
    w.finish()?;
    Ok(())
}

fn read_array<const L: usize, R: Read>(r: &mut R) -> io::Result<[u8; L]> {
    let mut buf = [0u8; L];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_event_log<R: Read>(input: R) -> Result<JumpPath> {
    let mut r = BufReader::new(input);
    let bad = |what: &str| Error::Input(format!("malformed event log: {what}"));
    let header = |e: io::Error| match e.kind() {
        io::ErrorKind::UnexpectedEof => bad("truncated header"),
        _ => Error::Io(e),
    };
    let k = u32::from_le_bytes(read_array(&mut r).map_err(header)?) as usize;
    let n = u64::from_le_bytes(read_array(&mut r).map_err(header)?);
    let horizon = f64::from_le_bytes(read_array(&mut r).map_err(header)?);
    let seed = u64::from_le_bytes(read_array(&mut r).map_err(header)?);
    if k == 0 || k > usize::from(u16::MAX) {
        return Err(bad("type count"));
    }
    let n = u32::try_from(n).map_err(|_| bad("N does not fit in 32 bits"))?;
    let mut initial_counts = Vec::with_capacity(k);
    for _ in 0..k {
        let c = u32::from_le_bytes(read_array(&mut r).map_err(header)?);
        if c > n {
            return Err(bad("initial count exceeds N"));
        }
        initial_counts.push(c);
    }
    let mut events = Vec::new();
    let mut counts = initial_counts.clone();
    let mut last = 0.0;
    loop {
        if r.fill_buf()?.is_empty() {
            break;
        }
        let buf: [u8; EVENT_BYTES] = read_array(&mut r).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => bad("truncated event record"),
            _ => Error::Io(e),
        })?;
        let time = f64::from_le_bytes(buf[..8].try_into().unwrap());
        let ty = u16::from_le_bytes([buf[8], buf[9]]);
        let direction = buf[10] as i8;
        if ty == 0 || usize::from(ty) > k {
            return Err(bad("event type out of range"));
        }
        if direction != 1 && direction != -1 {
            return Err(bad("direction must be +1 or -1"));
        }
        if !(time >= last && time <= horizon) {
            return Err(bad("event times must be nondecreasing within [0, T]"));
        }
        let c = &mut counts[usize::from(ty - 1)];
        if direction > 0 {
            if *c == n {
                return Err(bad("count rises above N"));
            }
            *c += 1;
        } else {
            if *c == 0 {
                return Err(bad("count drops below zero"));
            }
            *c -= 1;
        }
        last = time;
        events.push(JumpEvent {
            time,
            type_index: ty - 1,
            direction,
        });
    }
    Ok(JumpPath {
        n,
        horizon,
        seed,
        initial_counts,
        events,
    })
}

pub fn save_event_log(path: &JumpPath, file: &Path) -> Result<()> {
    write_event_log(path, std::fs::File::create(file)?)
}

pub fn load_event_log(file: &Path) -> Result<JumpPath> {
    read_event_log(std::fs::File::open(file)?)
}

pub const EVENT_CSV_HEADER: &str = "time,type,direction";

/// CSV with one row per event; types are one-based.
pub fn write_event_csv<W: Write>(path: &JumpPath, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{EVENT_CSV_HEADER}")?;
    for e in &path.events {
        writeln!(w, "{},{},{}", e.time, e.type_index + 1, e.direction)?;
    }
    w.flush()?;
    Ok(())
}

pub const DISCREPANCY_CSV_HEADER: &str = "tau_index,time,type,which_process,delta_l1_after";

pub fn write_discrepancy_csv<W: Write>(run: &CoupledRun, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{DISCREPANCY_CSV_HEADER}")?;
    for d in &run.discrepancies {
        writeln!(
            w,
            "{},{},{},{},{}",
            d.index,
            d.time,
            d.type_index + 1,
            d.process.label(),
            d.delta_l1_after
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Discrepancy times read back from a discrepancy CSV.
pub fn read_discrepancy_times<R: Read>(input: R) -> Result<Vec<f64>> {
    let r = BufReader::new(input);
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == DISCREPANCY_CSV_HEADER => {}
        _ => return Err(Error::Input("discrepancy CSV has an unexpected header".into())),
    }
    let mut times = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = line
            .split(',')
            .nth(1)
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| Error::Input(format!("discrepancy CSV row {} is malformed", row + 2)))?;
        times.push(t);
    }
    Ok(times)
}

/// Writes `m.bin`, `m_hat.bin` and `discrepancies.csv` into `dir`.
pub fn save_coupled_run(run: &CoupledRun, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_event_log(&run.m_path, &dir.join("m.bin"))?;
    save_event_log(&run.m_hat_path, &dir.join("m_hat.bin"))?;
    write_discrepancy_csv(run, std::fs::File::create(dir.join("discrepancies.csv"))?)
}
