//! DUT adapter that drives an external simulator process over pipes.
//!
//! Both directions speak the same framing: a tag byte, a little-endian u32
//! body length, then the body. The child answers every request with a frame
//! carrying the same tag. `hello` reports name, input width, and coverpoint
//! count; `step` carries a whole stimulus in one frame so a run costs a
//! fixed number of round trips regardless of cycle count.

use std::io::{BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::thread::JoinHandle;
use std::time::Duration;

use super::{CheckResult, Dut, DutDescriptor};
use crate::coverage::CoverageVector;
use crate::grammar::{bytes_per_cycle, GrammarMode};
use crate::{Error, Result};

pub const TAG_HELLO: u8 = 0x01;
pub const TAG_RESET: u8 = 0x02;
pub const TAG_STEP: u8 = 0x03;
pub const TAG_GETCOV: u8 = 0x04;
pub const TAG_CHECK: u8 = 0x05;

const MAX_BODY: u32 = 64 << 20;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

fn proto(msg: impl Into<String>) -> Error {
    Error::Protocol(msg.into())
}

pub fn write_frame<W: Write>(w: &mut W, tag: u8, body: &[u8]) -> std::io::Result<()> {
    w.write_all(&[tag])?;
    w.write_all(&(body.len() as u32).to_le_bytes())?;
    w.write_all(body)?;
    w.flush()
}

/// Reads one frame; `Ok(None)` means clean end-of-stream at a frame
/// boundary.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<(u8, Vec<u8>)>> {
    let mut tag = [0u8; 1];
    match r.read(&mut tag) {
        Ok(0) => return Ok(None),
        Ok(_) => {}
        Err(e) => return Err(e.into()),
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)
        .map_err(|e| proto(format!("truncated frame header: {e}")))?;
    let len = u32::from_le_bytes(len);
    if len > MAX_BODY {
        return Err(proto(format!(
            "frame body of {len} bytes exceeds the limit"
        )));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)
        .map_err(|e| proto(format!("truncated frame body: {e}")))?;
    Ok(Some((tag[0], body)))
}

struct BodyReader<'a> {
    body: &'a [u8],
    at: usize,
}

impl<'a> BodyReader<'a> {
    fn new(body: &'a [u8]) -> Self {
        BodyReader { body, at: 0 }
    }

    fn u32(&mut self) -> Result<u32> {
        let end = self.at + 4;
        if end > self.body.len() {
            return Err(proto("frame body ran out while reading a u32"));
        }
        let v = u32::from_le_bytes(self.body[self.at..end].try_into().unwrap());
        self.at = end;
        Ok(v)
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        if end > self.body.len() {
            return Err(proto(format!("frame body ran out while reading {n} bytes")));
        }
        let s = &self.body[self.at..end];
        self.at = end;
        Ok(s)
    }
}

type FrameResult = std::result::Result<(u8, Vec<u8>), String>;

/// A DUT living in a child process.
pub struct SubprocessDut {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    frames: mpsc::Receiver<FrameResult>,
    reader: Option<JoinHandle<()>>,
    descriptor: DutDescriptor,
    bytes_per_cycle: usize,
    timeout: Duration,
}

impl SubprocessDut {
    /// Spawns `argv` and performs the hello exchange.
    pub fn spawn(argv: &[String], timeout: Duration) -> Result<Self> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::Config("empty DUT command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| proto(format!("failed to spawn '{program}': {e}")))?;
        let stdin = BufWriter::new(child.stdin.take().expect("stdin was piped"));
        let stdout = child.stdout.take().expect("stdout was piped");

        let (tx, rx) = mpsc::channel();
        let reader = std::thread::spawn(move || {
            let mut stdout = BufReader::new(stdout);
            loop {
                match read_frame(&mut stdout) {
                    Ok(Some(frame)) => {
                        if tx.send(Ok(frame)).is_err() {
                            return;
                        }
                    }
                    Ok(None) => {
                        let _ = tx.send(Err("DUT process closed its output".to_string()));
                        return;
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e.to_string()));
                        return;
                    }
                }
            }
        });

        let mut dut = SubprocessDut {
            child,
            stdin: Some(stdin),
            frames: rx,
            reader: Some(reader),
            descriptor: DutDescriptor {
                name: String::new(),
                input_width_bits: 0,
                coverpoint_count: 0,
                grammar: GrammarMode::RawBits,
            },
            bytes_per_cycle: 0,
            timeout,
        };

        let hello = dut.request(TAG_HELLO, &[])?;
        let mut r = BodyReader::new(&hello);
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.bytes(name_len)?.to_vec())
            .map_err(|_| proto("hello reply carried a non-UTF-8 name"))?;
        let width = r.u32()?;
        let coverpoints = r.u32()? as usize;
        dut.descriptor = DutDescriptor {
            name,
            input_width_bits: width,
            coverpoint_count: coverpoints,
            grammar: GrammarMode::RawBits,
        };
        dut.descriptor.validate()?;
        dut.bytes_per_cycle = bytes_per_cycle(width);
        Ok(dut)
    }

    fn request(&mut self, tag: u8, body: &[u8]) -> Result<Vec<u8>> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| proto("DUT process already shut down"))?;
        write_frame(stdin, tag, body)
            .map_err(|e| proto(format!("failed to send request {tag:#04x}: {e}")))?;
        match self.frames.recv_timeout(self.timeout) {
            Ok(Ok((reply_tag, reply))) if reply_tag == tag => Ok(reply),
            Ok(Ok((reply_tag, _))) => Err(proto(format!(
                "expected reply tag {tag:#04x}, got {reply_tag:#04x}"
            ))),
            Ok(Err(msg)) => Err(proto(msg)),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(proto(format!(
                "no reply to request {tag:#04x} within {:?}",
                self.timeout
            ))),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(proto("DUT process closed its output"))
            }
        }
    }
}

impl Drop for SubprocessDut {
    fn drop(&mut self) {
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
        if let Some(reader) = self.reader.take() {
            let _ = reader.join();
        }
    }
}

impl Dut for SubprocessDut {
    fn descriptor(&self) -> &DutDescriptor {
        &self.descriptor
    }

    fn reset(&mut self) -> Result<()> {
        self.request(TAG_RESET, &[])?;
        Ok(())
    }

    fn step(&mut self, cycle: &[u8]) -> Result<()> {
        self.step_cycles(cycle, cycle.len())
    }

    fn step_cycles(&mut self, data: &[u8], bytes_per_cycle: usize) -> Result<()> {
        if bytes_per_cycle != self.bytes_per_cycle {
            return Err(proto(format!(
                "stimulus uses {bytes_per_cycle} bytes per cycle, DUT expects {}",
                self.bytes_per_cycle
            )));
        }
        let cycles = (data.len() / bytes_per_cycle) as u32;
        let mut body = Vec::with_capacity(4 + data.len());
        body.extend_from_slice(&cycles.to_le_bytes());
        body.extend_from_slice(data);
        self.request(TAG_STEP, &body)?;
        Ok(())
    }

    fn read_coverage(&mut self) -> Result<CoverageVector> {
        let reply = self.request(TAG_GETCOV, &[])?;
        let mut r = BodyReader::new(&reply);
        let count = r.u32()? as usize;
        if count != self.descriptor.coverpoint_count {
            return Err(proto(format!(
                "coverage reply has {count} points, hello declared {}",
                self.descriptor.coverpoint_count
            )));
        }
        let mut hits = Vec::with_capacity(count);
        for _ in 0..count {
            hits.push(r.u32()?);
        }
        Ok(CoverageVector::new(hits))
    }

    fn check(&mut self) -> Result<CheckResult> {
        let reply = self.request(TAG_CHECK, &[])?;
        match reply.first() {
            Some(1) => Ok(CheckResult::Pass),
            Some(0) => Ok(CheckResult::Fail(
                "DUT process reported a failed check".to_string(),
            )),
            _ => Err(proto("check reply must be one status byte")),
        }
    }
}

/// Serves a DUT over the wire protocol until the peer closes the stream.
pub fn serve<R: Read, W: Write>(dut: &mut dyn Dut, reader: R, writer: W) -> Result<()> {
    let mut reader = BufReader::new(reader);
    let mut writer = BufWriter::new(writer);
    let bpc = bytes_per_cycle(dut.descriptor().input_width_bits);
    while let Some((tag, body)) = read_frame(&mut reader)? {
        match tag {
            TAG_HELLO => {
                let d = dut.descriptor();
                let name = d.name.as_bytes();
                let mut reply = Vec::with_capacity(12 + name.len());
                reply.extend_from_slice(&(name.len() as u32).to_le_bytes());
                reply.extend_from_slice(name);
                reply.extend_from_slice(&d.input_width_bits.to_le_bytes());
                reply.extend_from_slice(&(d.coverpoint_count as u32).to_le_bytes());
                write_frame(&mut writer, tag, &reply)?;
            }
            TAG_RESET => {
                dut.reset()?;
                write_frame(&mut writer, tag, &[])?;
            }
            TAG_STEP => {
                let mut r = BodyReader::new(&body);
                let cycles = r.u32()? as usize;
                let data = r.bytes(cycles * bpc)?;
                dut.step_cycles(data, bpc)?;
                write_frame(&mut writer, tag, &[])?;
            }
            TAG_GETCOV => {
                let coverage = dut.read_coverage()?;
                let mut reply = Vec::with_capacity(4 + coverage.len() * 4);
                reply.extend_from_slice(&(coverage.len() as u32).to_le_bytes());
                for &h in coverage.hits() {
                    reply.extend_from_slice(&h.to_le_bytes());
                }
                write_frame(&mut writer, tag, &reply)?;
            }
            TAG_CHECK => {
                let status = match dut.check()? {
                    CheckResult::Pass => 1u8,
                    CheckResult::Fail(_) => 0u8,
                };
                write_frame(&mut writer, tag, &[status])?;
            }
            other => return Err(proto(format!("unknown request tag {other:#04x}"))),
        }
    }
    Ok(())
}
