//! Raw IQ files: interleaved little-endian f32 I/Q pairs ("cf32le") plus a
//! JSON sidecar next to the payload (`capture.iq` -> `capture.iq.json`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::capture::IqCapture;
use crate::error::{Error, Result};

pub const IQ_SCHEMA_VERSION: u32 = 1;
pub const BYTES_PER_SAMPLE: u64 = 8;
pub const FORMAT_CF32LE: &str = "cf32le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqMeta {
    pub schema_version: u32,
    pub format: String,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub center_freq_hz: f64,
    #[serde(default)]
    pub t0_s: f64,
    #[serde(default)]
    pub antenna_id: u32,
    pub n_samples: u64,
}

impl IqMeta {
    pub fn for_capture(cap: &IqCapture, center_freq_hz: f64) -> Self {
        IqMeta {
            schema_version: IQ_SCHEMA_VERSION,
            format: FORMAT_CF32LE.into(),
            sample_rate_hz: cap.sample_rate_hz,
            center_freq_hz,
            t0_s: cap.t0_s,
            antenna_id: cap.antenna_id,
            n_samples: cap.len() as u64,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Payload size for a capture of `duration_s` at `fs`.
pub fn payload_bytes(duration_s: f64, fs: f64) -> u64 {
    (duration_s * fs).round() as u64 * BYTES_PER_SAMPLE
}

fn disp(p: &Path) -> String {
    p.display().to_string()
}

pub fn read_meta(path: &Path) -> Result<IqMeta> {
    let sc = sidecar_path(path);
    let text = std::fs::read_to_string(&sc).map_err(|e| Error::io(format!("reading {}", disp(&sc)), e))?;
    let meta: IqMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: disp(&sc),
        offset: line_col_offset(&text, e.line(), e.column()),
        msg: e.to_string(),
    })?;
    if meta.format != FORMAT_CF32LE {
        return Err(Error::Parse { path: disp(&sc), offset: 0, msg: format!("unsupported sample format {:?}", meta.format) });
    }
    if meta.schema_version != IQ_SCHEMA_VERSION {
        return Err(Error::Parse { path: disp(&sc), offset: 0, msg: format!("unsupported schema_version {}", meta.schema_version) });
    }
    if !(meta.sample_rate_hz.is_finite() && meta.sample_rate_hz > 0.0) {
        return Err(Error::Parse { path: disp(&sc), offset: 0, msg: format!("bad sample_rate_hz {}", meta.sample_rate_hz) });
    }
    Ok(meta)
}

fn line_col_offset(text: &str, line: usize, col: usize) -> u64 {
    let mut off = 0usize;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (off + col.saturating_sub(1)) as u64;
        }
        off += l.len();
    }
    off as u64
}

/// Streaming writer; the sidecar is written by [`IqWriter::finish`].
pub struct IqWriter {
    out: BufWriter<File>,
    path: PathBuf,
    meta: IqMeta,
}

impl IqWriter {
    pub fn create(path: &Path, sample_rate_hz: f64, center_freq_hz: f64, t0_s: f64, antenna_id: u32) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(format!("creating {}", disp(path)), e))?;
        Ok(IqWriter {
            out: BufWriter::with_capacity(1 << 20, f),
            path: path.to_path_buf(),
            meta: IqMeta {
                schema_version: IQ_SCHEMA_VERSION,
                format: FORMAT_CF32LE.into(),
                sample_rate_hz,
                center_freq_hz,
                t0_s,
                antenna_id,
                n_samples: 0,
            },
        })
    }

    pub fn write(&mut self, samples: &[C64]) -> Result<()> {
        let mut buf = Vec::with_capacity(samples.len() * 8);
        for v in samples {
            buf.extend_from_slice(&(v.re as f32).to_le_bytes());
            buf.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        self.out.write_all(&buf).map_err(|e| Error::io(format!("writing {}", disp(&self.path)), e))?;
        self.meta.n_samples += samples.len() as u64;
        Ok(())
    }

    pub fn finish(mut self) -> Result<IqMeta> {
        self.out.flush().map_err(|e| Error::io(format!("writing {}", disp(&self.path)), e))?;
        let sc = sidecar_path(&self.path);
        let text = serde_json::to_string_pretty(&self.meta).map_err(|e| Error::Other(e.to_string()))?;
        std::fs::write(&sc, text + "\n").map_err(|e| Error::io(format!("writing {}", disp(&sc)), e))?;
        Ok(self.meta)
    }
}

pub fn write_iq(path: &Path, cap: &IqCapture, center_freq_hz: f64) -> Result<IqMeta> {
    let mut w = IqWriter::create(path, cap.sample_rate_hz, center_freq_hz, cap.t0_s, cap.antenna_id)?;
    w.write(&cap.samples)?;
    w.finish()
}

/// Chunked reader that never holds more than one chunk of the payload.
pub struct IqReader {
    inp: BufReader<File>,
    path: PathBuf,
    pub meta: IqMeta,
    /// Byte offset of the next unread sample.
    pos: u64,
    len: u64,
}

impl IqReader {
    pub fn open(path: &Path) -> Result<Self> {
        let meta = read_meta(path)?;
        let f = File::open(path).map_err(|e| Error::io(format!("opening {}", disp(path)), e))?;
        let len = f.metadata().map_err(|e| Error::io(format!("stat {}", disp(path)), e))?.len();
        if len % BYTES_PER_SAMPLE != 0 {
            return Err(Error::Parse {
                path: disp(path),
                offset: len - len % BYTES_PER_SAMPLE,
                msg: format!("truncated payload: {} trailing bytes do not form a complete I/Q pair", len % BYTES_PER_SAMPLE),
            });
        }
        if len / BYTES_PER_SAMPLE != meta.n_samples {
            let expect = meta.n_samples * BYTES_PER_SAMPLE;
            return Err(Error::Parse {
                path: disp(path),
                offset: len.min(expect),
                msg: format!("payload holds {} samples, metadata says {}", len / BYTES_PER_SAMPLE, meta.n_samples),
            });
        }
        Ok(IqReader { inp: BufReader::with_capacity(1 << 20, f), path: path.to_path_buf(), meta, pos: 0, len })
    }

    pub fn remaining(&self) -> u64 {
        (self.len - self.pos) / BYTES_PER_SAMPLE
    }

    /// Next `max` samples or fewer; empty at end of file.
    pub fn read_chunk(&mut self, max: usize) -> Result<Vec<C64>> {
        let n = (max as u64).min(self.remaining()) as usize;
        let mut raw = vec![0u8; n * 8];
        self.inp.read_exact(&mut raw).map_err(|e| Error::Parse {
            path: disp(&self.path),
            offset: self.pos,
            msg: format!("short read: {e}"),
        })?;
        self.pos += raw.len() as u64;
        Ok(raw
            .chunks_exact(8)
            .map(|b| {
                let re = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                let im = f32::from_le_bytes([b[4], b[5], b[6], b[7]]);
                C64::new(f64::from(re), f64::from(im))
            })
            .collect())
    }
}

pub fn read_iq(path: &Path) -> Result<IqCapture> {
    let mut r = IqReader::open(path)?;
    let n = r.remaining() as usize;
    let samples = r.read_chunk(n)?;
    let m = &r.meta;
    let cap = IqCapture { samples, sample_rate_hz: m.sample_rate_hz, t0_s: m.t0_s, antenna_id: m.antenna_id };
    if cap.is_empty() {
        return Err(Error::Parse { path: disp(path), offset: 0, msg: "empty payload".into() });
    }
    if let Some(i) = cap.samples.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Parse { path: disp(path), offset: i as u64 * BYTES_PER_SAMPLE, msg: "non-finite sample".into() });
    }
    Ok(cap)
}
