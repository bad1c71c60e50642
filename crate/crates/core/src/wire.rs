//! Framed binary link between the sensor board and the host.
//!
//! Every reading travels as a fixed 16-byte record:
//!
//! ```text
//! offset  size  field
//!  0      2     sync 0xAA 0x55
//!  2      2     seq (u16, little-endian, wraps)
//!  4      2     t_ms, low 16 bits (little-endian)
//!  6      2     ax  (i16, milli-g)
//!  8      2     ay  (i16, milli-g)
//! 10      2     az  (i16, milli-g)
//! 12      2     stretch (u16, ADC counts 0..=1023)
//! 14      1     flags (bit0 = button, bits 1..7 reserved = 0)
//! 15      1     CRC-8 (poly 0x07, init 0x00) over bytes 2..=14
//! ```
//!
//! The host recovers the full millisecond clock by unrolling the 16-bit
//! timestamp in arrival order; at any rate of 10 Hz or more a wrap is
//! unambiguous.

use std::io::{self, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FRAME_LEN: usize = 16;
pub const SYNC: [u8; 2] = [0xAA, 0x55];
pub const STRETCH_MAX: u16 = 1023;

const FLAG_BUTTON: u8 = 0x01;

/// One timestamped reading from the chin board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SensorFrame {
    pub seq: u16,
    /// Milliseconds since stream start.
    pub t_ms: u32,
    pub ax: i16,
    pub ay: i16,
    pub az: i16,
    pub stretch: u16,
    pub button: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("stretch reading {0} exceeds the 10-bit ADC range")]
    StretchOutOfRange(u16),
    #[error("missing sync word")]
    BadSync,
    #[error("crc mismatch: computed {computed:#04x}, frame carries {carried:#04x}")]
    BadCrc { computed: u8, carried: u8 },
    #[error("reserved flag bits set: {0:#04x}")]
    ReservedFlags(u8),
}

const CRC8_TABLE: [u8; 256] = build_crc8_table();

const fn build_crc8_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x80 != 0 {
                (crc << 1) ^ 0x07
            } else {
                crc << 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// CRC-8 with polynomial 0x07, zero init, no reflection, no final xor.
pub fn crc8(bytes: &[u8]) -> u8 {
    bytes
        .iter()
        .fold(0u8, |crc, &b| CRC8_TABLE[(crc ^ b) as usize])
}

pub fn encode_frame(frame: &SensorFrame) -> Result<[u8; FRAME_LEN], WireError> {
    if frame.stretch > STRETCH_MAX {
        return Err(WireError::StretchOutOfRange(frame.stretch));
    }
    let mut out = [0u8; FRAME_LEN];
    out[0..2].copy_from_slice(&SYNC);
    out[2..4].copy_from_slice(&frame.seq.to_le_bytes());
    out[4..6].copy_from_slice(&(frame.t_ms as u16).to_le_bytes());
    out[6..8].copy_from_slice(&frame.ax.to_le_bytes());
    out[8..10].copy_from_slice(&frame.ay.to_le_bytes());
    out[10..12].copy_from_slice(&frame.az.to_le_bytes());
    out[12..14].copy_from_slice(&frame.stretch.to_le_bytes());
    out[14] = if frame.button { FLAG_BUTTON } else { 0 };
    out[15] = crc8(&out[2..15]);
    Ok(out)
}

/// Decodes a single aligned record. The returned `t_ms` carries only the
/// 16 bits present on the wire; [`StreamDecoder`] unrolls it.
pub fn decode_frame(bytes: &[u8; FRAME_LEN]) -> Result<SensorFrame, WireError> {
    if bytes[0..2] != SYNC {
        return Err(WireError::BadSync);
    }
    let computed = crc8(&bytes[2..15]);
    if computed != bytes[15] {
        return Err(WireError::BadCrc {
            computed,
            carried: bytes[15],
        });
    }
    if bytes[14] & !FLAG_BUTTON != 0 {
        return Err(WireError::ReservedFlags(bytes[14]));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let i16_at = |i: usize| i16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let stretch = u16_at(12);
    if stretch > STRETCH_MAX {
        return Err(WireError::StretchOutOfRange(stretch));
    }
    Ok(SensorFrame {
        seq: u16_at(2),
        t_ms: u16_at(4) as u32,
        ax: i16_at(6),
        ay: i16_at(8),
        az: i16_at(10),
        stretch,
        button: bytes[14] & FLAG_BUTTON != 0,
    })
}

/// Per-stream bookkeeping. Corruption is counted here, never raised.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderStats {
    pub frames: u64,
    /// Sync-aligned candidates whose CRC did not verify.
    pub crc_failures: u64,
    /// CRC-valid candidates with out-of-range fields.
    pub malformed: u64,
    /// Times alignment was lost and then re-found on a sync pair.
    pub resyncs: u64,
    pub bytes_discarded: u64,
    /// Frames missing according to the sequence counter.
    pub seq_gaps: u64,
}

/// Incremental decoder state. Owned by a single reader.
#[derive(Debug, Clone, Default)]
pub struct StreamDecoder {
    buf: Vec<u8>,
    stats: DecoderStats,
    discarding: bool,
    last_seq: Option<u16>,
    clock: Option<(u32, u16)>,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> DecoderStats {
        self.stats
    }

    /// Bytes held back waiting for the rest of a frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<SensorFrame> {
        let mut out = Vec::with_capacity(bytes.len() / FRAME_LEN + 1);
        self.push_into(bytes, &mut out);
        out
    }

    pub fn push_into(&mut self, bytes: &[u8], out: &mut Vec<SensorFrame>) {
        self.buf.extend_from_slice(bytes);
        let mut pos = 0;
        let buf = std::mem::take(&mut self.buf);
        while buf.len() - pos >= 2 {
            if buf[pos] != SYNC[0] || buf[pos + 1] != SYNC[1] {
                self.discard(1);
                pos += 1;
                continue;
            }
            if buf.len() - pos < FRAME_LEN {
                break;
            }
            if self.discarding {
                self.stats.resyncs += 1;
                self.discarding = false;
            }
            let record: &[u8; FRAME_LEN] = buf[pos..pos + FRAME_LEN].try_into().unwrap();
            match decode_frame(record) {
                Ok(frame) => {
                    out.push(self.accept(frame));
                    pos += FRAME_LEN;
                }
                Err(e) => {
                    match e {
                        WireError::BadCrc { .. } => self.stats.crc_failures += 1,
                        _ => self.stats.malformed += 1,
                    }
                    // Step past this sync only: an intact frame may begin
                    // inside the rejected window.
                    self.discard(1);
                    pos += 1;
                }
            }
        }
        self.buf = buf;
        self.buf.drain(..pos);
    }

    fn discard(&mut self, n: u64) {
        self.stats.bytes_discarded += n;
        self.discarding = true;
    }

    fn accept(&mut self, mut frame: SensorFrame) -> SensorFrame {
        let low = frame.t_ms as u16;
        let full = match self.clock {
            None => low as u32,
            Some((prev_full, prev_low)) => {
                prev_full.wrapping_add(low.wrapping_sub(prev_low) as u32)
            }
        };
        self.clock = Some((full, low));
        frame.t_ms = full;

        if let Some(prev) = self.last_seq {
            let expected = prev.wrapping_add(1);
            self.stats.seq_gaps += frame.seq.wrapping_sub(expected) as u64;
        }
        self.last_seq = Some(frame.seq);
        self.stats.frames += 1;
        frame
    }
}

/// Functional form: consumes `state`, returns the frames completed by
/// `bytes` and the advanced state.
pub fn decode_stream(bytes: &[u8], mut state: StreamDecoder) -> (Vec<SensorFrame>, StreamDecoder) {
    let frames = state.push(bytes);
    (frames, state)
}

/// Pulls frames out of any byte source: an in-memory simulator stream, a
/// file, or a serial device node.
pub struct FrameReader<R> {
    inner: R,
    decoder: StreamDecoder,
    ready: std::collections::VecDeque<SensorFrame>,
    chunk: Vec<u8>,
    eof: bool,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            decoder: StreamDecoder::new(),
            ready: Default::default(),
            chunk: vec![0; 4096],
            eof: false,
        }
    }

    pub fn stats(&self) -> DecoderStats {
        self.decoder.stats()
    }

    pub fn next_frame(&mut self) -> io::Result<Option<SensorFrame>> {
        loop {
            if let Some(f) = self.ready.pop_front() {
                return Ok(Some(f));
            }
            if self.eof {
                return Ok(None);
            }
            let n = match self.inner.read(&mut self.chunk) {
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            };
            if n == 0 {
                self.eof = true;
                continue;
            }
            let frames = self.decoder.push(&self.chunk[..n]);
            self.ready.extend(frames);
        }
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = io::Result<SensorFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

/// Opens a serial device node (USB CDC-ACM boards ignore the baud rate).
#[cfg(feature = "serial")]
pub fn open_serial(path: impl AsRef<std::path::Path>) -> io::Result<FrameReader<std::fs::File>> {
    let file = std::fs::OpenOptions::new().read(true).open(path)?;
    Ok(FrameReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(seq: u16, t_ms: u32) -> SensorFrame {
        SensorFrame {
            seq,
            t_ms,
            ax: -120,
            ay: 300,
            az: 1000,
            stretch: 512,
            button: seq % 2 == 0,
        }
    }

    // Bit-serial reference; shares nothing with the table build.
    fn crc8_bitwise(bytes: &[u8]) -> u8 {
        let mut crc: u16 = 0;
        for &b in bytes {
            crc ^= (b as u16) << 8;
            for _ in 0..8 {
                crc = if crc & 0x8000 != 0 {
                    (crc << 1) ^ 0x0700
                } else {
                    crc << 1
                };
            }
        }
        (crc >> 8) as u8
    }

    #[test]
    fn crc_check_value() {
        // CRC-8/SMBUS check value over ASCII "123456789".
        assert_eq!(crc8(b"123456789"), 0xF4);
        assert_eq!(crc8_bitwise(b"123456789"), 0xF4);
    }

    #[test]
    fn zero_frame_layout() {
        let bytes = encode_frame(&SensorFrame::default()).unwrap();
        assert_eq!(
            &bytes[..15],
            &[0xAA, 0x55, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(bytes[15], 0x00);
        assert_eq!(bytes[15], crc8_bitwise(&[0; 13]));
    }

    #[test]
    fn stretch_out_of_range_rejected() {
        let f = SensorFrame {
            stretch: 1024,
            ..Default::default()
        };
        assert_eq!(encode_frame(&f), Err(WireError::StretchOutOfRange(1024)));
    }

    #[test]
    fn three_frames_decode_cleanly() {
        let mut bytes = Vec::new();
        for i in 0..3 {
            bytes.extend_from_slice(&encode_frame(&frame(i, 10 * i as u32)).unwrap());
        }
        let (frames, state) = decode_stream(&bytes, StreamDecoder::new());
        assert_eq!(
            frames,
            (0..3).map(|i| frame(i, 10 * i as u32)).collect::<Vec<_>>()
        );
        let s = state.stats();
        assert_eq!((s.crc_failures, s.resyncs, s.seq_gaps), (0, 0, 0));
    }

    #[test]
    fn flipped_payload_byte_is_counted() {
        let mut bytes = encode_frame(&frame(1, 5)).unwrap();
        bytes[9] ^= 0x10;
        let (frames, state) = decode_stream(&bytes, StreamDecoder::new());
        assert!(frames.is_empty());
        assert_eq!(state.stats().crc_failures, 1);
    }

    #[test]
    fn garbage_prefix_resyncs() {
        let mut bytes = vec![0x13, 0xAA, 0x00, 0x55, 0xAA, 0xFF, 0x01];
        bytes.extend_from_slice(&encode_frame(&frame(4, 40)).unwrap());
        let (frames, state) = decode_stream(&bytes, StreamDecoder::new());
        assert_eq!(frames, vec![frame(4, 40)]);
        assert_eq!(state.stats().resyncs, 1);
        assert_eq!(state.stats().bytes_discarded, 7);
    }

    #[test]
    fn split_delivery_matches_whole() {
        let mut bytes = Vec::new();
        for i in 0..20 {
            bytes.extend_from_slice(&encode_frame(&frame(i, 3 * i as u32)).unwrap());
        }
        let mut dec = StreamDecoder::new();
        let mut got = Vec::new();
        for chunk in bytes.chunks(7) {
            dec.push_into(chunk, &mut got);
        }
        assert_eq!(got.len(), 20);
        assert_eq!(dec.pending(), 0);
    }

    #[test]
    fn timestamp_unrolls_across_wrap() {
        let mut dec = StreamDecoder::new();
        let mut got = Vec::new();
        for (i, t) in [65_000u32, 65_500, 66_000, 131_100].iter().enumerate() {
            dec.push_into(&encode_frame(&frame(i as u16, *t)).unwrap(), &mut got);
        }
        // First frame is taken at face value (low 16 bits).
        let base = 65_000u32;
        let ts: Vec<u32> = got.iter().map(|f| f.t_ms).collect();
        assert_eq!(ts, vec![base, base + 500, base + 1000, base + 66_100]);
    }

    #[test]
    fn sequence_gaps_are_counted() {
        let mut bytes = Vec::new();
        for seq in [0u16, 1, 4, 5, 65535, 0] {
            bytes.extend_from_slice(&encode_frame(&frame(seq, 0)).unwrap());
        }
        let (_, state) = decode_stream(&bytes, StreamDecoder::new());
        // 1 -> 4 skips two, 5 -> 65535 skips 65529.
        assert_eq!(state.stats().seq_gaps, 2 + 65529);
    }

    #[test]
    fn frame_reader_over_cursor() {
        let mut bytes = Vec::new();
        for i in 0..1000 {
            bytes.extend_from_slice(&encode_frame(&frame(i, 10 * i as u32)).unwrap());
        }
        let frames: Vec<_> = FrameReader::new(io::Cursor::new(bytes))
            .collect::<io::Result<_>>()
            .unwrap();
        assert_eq!(frames.len(), 1000);
        assert_eq!(frames[999].t_ms, 9990);
    }

    #[test]
    fn every_single_bit_error_detected() {
        let clean = encode_frame(&frame(77, 1234)).unwrap();
        for byte in 2..FRAME_LEN {
            for bit in 0..8 {
                let mut b = clean;
                b[byte] ^= 1 << bit;
                assert!(decode_frame(&b).is_err(), "byte {byte} bit {bit}");
            }
        }
    }

    #[test]
    fn table_matches_bitwise_reference() {
        for len in 0..32usize {
            let data: Vec<u8> = (0..len).map(|i| (i * 37 + 11) as u8).collect();
            assert_eq!(crc8(&data), crc8_bitwise(&data));
        }
    }
}
