//! Per-camera video output.
//!
//! [`VideoMode::Mp4`] writes Motion-JPEG samples in an ISO-BMFF (MP4)
//! container: one `mp4v` sample entry whose decoder config declares JPEG
//! (object type 0x6C), constant 50 ms sample duration at 20 fps, all samples
//! in a single chunk. [`VideoMode::ImageSequence`] writes lossless PNG frames
//! instead and is byte-reproducible.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::messages::ImageFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VideoMode {
    /// MJPEG in MP4 at the given JPEG quality (1-100).
    Mp4 { quality: u8 },
    /// One PNG per frame in a per-episode directory.
    ImageSequence,
}

impl Default for VideoMode {
    fn default() -> Self {
        VideoMode::Mp4 { quality: 85 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VideoError {
    #[error("no frames")]
    Empty,
    #[error("frame {index} is {got:?}, stream is {expected:?}")]
    ResolutionChanged { index: usize, expected: (u32, u32), got: (u32, u32) },
    #[error("encode: {0}")]
    Encode(String),
    #[error("mp4 too large for 32-bit offsets")]
    TooLarge,
    #[error("malformed mp4: {0}")]
    Malformed(String),
}

pub fn encode_png(frame: &ImageFrame) -> Result<Vec<u8>, VideoError> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(&frame.rgb, frame.width, frame.height, ExtendedColorType::Rgb8)
        .map_err(|e| VideoError::Encode(e.to_string()))?;
    Ok(out)
}

pub fn encode_jpeg(frame: &ImageFrame, quality: u8) -> Result<Vec<u8>, VideoError> {
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(Cursor::new(&mut out), quality.clamp(1, 100))
        .encode(&frame.rgb, frame.width, frame.height, ExtendedColorType::Rgb8)
        .map_err(|e| VideoError::Encode(e.to_string()))?;
    Ok(out)
}

fn check_resolution(frames: &[ImageFrame]) -> Result<(u32, u32), VideoError> {
    let first = frames.first().ok_or(VideoError::Empty)?;
    let expected = (first.width, first.height);
    for (index, f) in frames.iter().enumerate() {
        if (f.width, f.height) != expected {
            return Err(VideoError::ResolutionChanged { index, expected, got: (f.width, f.height) });
        }
    }
    Ok(expected)
}

const TIMESCALE: u32 = 1000;

struct BoxWriter(Vec<u8>);

impl BoxWriter {
    fn new() -> Self {
        Self(Vec::new())
    }
    fn u8(&mut self, v: u8) -> &mut Self {
        self.0.push(v);
        self
    }
    fn u16(&mut self, v: u16) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn u32(&mut self, v: u32) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.extend_from_slice(b);
        self
    }
    fn zeros(&mut self, n: usize) -> &mut Self {
        self.0.resize(self.0.len() + n, 0);
        self
    }
    fn matrix(&mut self) -> &mut Self {
        for v in [0x0001_0000u32, 0, 0, 0, 0x0001_0000, 0, 0, 0, 0x4000_0000] {
            self.u32(v);
        }
        self
    }
}

fn mp4_box(kind: &[u8; 4], body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 8);
    out.extend_from_slice(&((body.len() + 8) as u32).to_be_bytes());
    out.extend_from_slice(kind);
    out.extend_from_slice(body);
    out
}

fn full_box(kind: &[u8; 4], version: u8, flags: u32, body: &[u8]) -> Vec<u8> {
    let mut b = BoxWriter::new();
    b.u32((version as u32) << 24 | (flags & 0x00ff_ffff)).bytes(body);
    mp4_box(kind, &b.0)
}

fn container(kind: &[u8; 4], children: &[Vec<u8>]) -> Vec<u8> {
    mp4_box(kind, &children.concat())
}

fn descriptor(tag: u8, body: &[u8]) -> Vec<u8> {
    let n = body.len() as u32;
    let mut out = vec![tag, 0x80 | ((n >> 21) & 0x7f) as u8, 0x80 | ((n >> 14) & 0x7f) as u8, 0x80 | ((n >> 7) & 0x7f) as u8, (n & 0x7f) as u8];
    out.extend_from_slice(body);
    out
}

fn esds() -> Vec<u8> {
    let mut dcd = BoxWriter::new();
    // JPEG object type, visual stream, no decoder-specific info
    dcd.u8(0x6C).u8((0x04 << 2) | 1).bytes(&[0, 0, 0]).u32(0).u32(0);
    let sl = descriptor(0x06, &[0x02]);
    let mut es = BoxWriter::new();
    es.u16(1).u8(0).bytes(&descriptor(0x04, &dcd.0)).bytes(&sl);
    full_box(b"esds", 0, 0, &descriptor(0x03, &es.0))
}

fn sample_entry(width: u32, height: u32) -> Vec<u8> {
    let mut b = BoxWriter::new();
    b.zeros(6).u16(1); // reserved, data_reference_index
    b.u16(0).u16(0).zeros(12);
    b.u16(width as u16).u16(height as u16);
    b.u32(0x0048_0000).u32(0x0048_0000).u32(0).u16(1);
    let mut name = [0u8; 32];
    let label = b"Motion JPEG";
    name[0] = label.len() as u8;
    name[1..=label.len()].copy_from_slice(label);
    b.bytes(&name).u16(0x0018).u16(0xffff);
    b.bytes(&esds());
    mp4_box(b"mp4v", &b.0)
}

/// Muxes already-encoded JPEG samples.
pub fn mux_mjpeg_mp4(samples: &[Vec<u8>], width: u32, height: u32, fps: u32) -> Result<Vec<u8>, VideoError> {
    if samples.is_empty() {
        return Err(VideoError::Empty);
    }
    let n = samples.len() as u32;
    let delta = TIMESCALE / fps.max(1);
    let duration = n * delta;

    let ftyp = mp4_box(b"ftyp", &[b"isom".as_slice(), &512u32.to_be_bytes(), b"isom", b"iso2", b"mp41"].concat());
    let payload: usize = samples.iter().map(Vec::len).sum();
    let mdat_offset = ftyp.len() + 8;
    if mdat_offset + payload > u32::MAX as usize {
        return Err(VideoError::TooLarge);
    }

    let mut mvhd = BoxWriter::new();
    mvhd.u32(0).u32(0).u32(TIMESCALE).u32(duration).u32(0x0001_0000).u16(0x0100).zeros(10).matrix().zeros(24).u32(2);
    let mut tkhd = BoxWriter::new();
    tkhd.u32(0).u32(0).u32(1).u32(0).u32(duration).zeros(8).u16(0).u16(0).u16(0).u16(0).matrix();
    tkhd.u32(width << 16).u32(height << 16);
    let mut mdhd = BoxWriter::new();
    mdhd.u32(0).u32(0).u32(TIMESCALE).u32(duration).u16(0x55c4).u16(0);
    let mut hdlr = BoxWriter::new();
    hdlr.u32(0).bytes(b"vide").zeros(12).bytes(b"VideoHandler\0");
    let mut vmhd = BoxWriter::new();
    vmhd.zeros(8);
    let url = full_box(b"url ", 0, 1, &[]);
    let mut dref = BoxWriter::new();
    dref.u32(1).bytes(&url);
    let mut stsd = BoxWriter::new();
    stsd.u32(1).bytes(&sample_entry(width, height));
    let mut stts = BoxWriter::new();
    stts.u32(1).u32(n).u32(delta);
    let mut stsc = BoxWriter::new();
    stsc.u32(1).u32(1).u32(n).u32(1);
    let mut stsz = BoxWriter::new();
    stsz.u32(0).u32(n);
    for s in samples {
        stsz.u32(s.len() as u32);
    }
    let mut stco = BoxWriter::new();
    stco.u32(1).u32(mdat_offset as u32);

    let stbl = container(
        b"stbl",
        &[
            full_box(b"stsd", 0, 0, &stsd.0),
            full_box(b"stts", 0, 0, &stts.0),
            full_box(b"stsc", 0, 0, &stsc.0),
            full_box(b"stsz", 0, 0, &stsz.0),
            full_box(b"stco", 0, 0, &stco.0),
        ],
    );
    let minf = container(
        b"minf",
        &[full_box(b"vmhd", 0, 1, &vmhd.0), container(b"dinf", &[full_box(b"dref", 0, 0, &dref.0)]), stbl],
    );
    let mdia = container(b"mdia", &[full_box(b"mdhd", 0, 0, &mdhd.0), full_box(b"hdlr", 0, 0, &hdlr.0), minf]);
    let trak = container(b"trak", &[full_box(b"tkhd", 0, 3, &tkhd.0), mdia]);
    let moov = container(b"moov", &[full_box(b"mvhd", 0, 0, &mvhd.0), trak]);

    let mut out = Vec::with_capacity(ftyp.len() + 8 + payload + moov.len());
    out.extend_from_slice(&ftyp);
    out.extend_from_slice(&((payload + 8) as u32).to_be_bytes());
    out.extend_from_slice(b"mdat");
    for s in samples {
        out.extend_from_slice(s);
    }
    out.extend_from_slice(&moov);
    Ok(out)
}

/// Encodes frames as MJPEG and muxes them.
pub fn encode_mp4(frames: &[ImageFrame], fps: u32, quality: u8) -> Result<Vec<u8>, VideoError> {
    let (w, h) = check_resolution(frames)?;
    let samples = frames.iter().map(|f| encode_jpeg(f, quality)).collect::<Result<Vec<_>, _>>()?;
    mux_mjpeg_mp4(&samples, w, h, fps)
}

/// PNG-encodes each frame, checking the resolution is constant.
pub fn encode_png_sequence(frames: &[ImageFrame]) -> Result<Vec<Vec<u8>>, VideoError> {
    check_resolution(frames)?;
    frames.iter().map(encode_png).collect()
}

/// What the validator needs to know about an MP4 file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mp4Info {
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub timescale: u32,
    pub sample_delta: u32,
    pub codec: [u8; 4],
    sample_sizes: Vec<u32>,
    chunk_offset: u32,
}

impl Mp4Info {
    /// Bytes of sample `i` within `file`.
    pub fn sample<'a>(&self, file: &'a [u8], i: usize) -> Option<&'a [u8]> {
        let start = self.chunk_offset as usize + self.sample_sizes[..i.min(self.sample_sizes.len())].iter().map(|&s| s as usize).sum::<usize>();
        let len = *self.sample_sizes.get(i)? as usize;
        file.get(start..start + len)
    }
}

fn children(data: &[u8]) -> Result<Vec<([u8; 4], &[u8])>, VideoError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < data.len() {
        let hdr = data.get(pos..pos + 8).ok_or_else(|| VideoError::Malformed("truncated box header".into()))?;
        let size = u32::from_be_bytes(hdr[..4].try_into().unwrap()) as usize;
        let kind: [u8; 4] = hdr[4..8].try_into().unwrap();
        if size < 8 || pos + size > data.len() {
            return Err(VideoError::Malformed(format!("bad size {size} for {}", String::from_utf8_lossy(&kind))));
        }
        out.push((kind, &data[pos + 8..pos + size]));
        pos += size;
    }
    Ok(out)
}

fn find<'a>(data: &'a [u8], kind: &[u8; 4]) -> Result<&'a [u8], VideoError> {
    children(data)?
        .into_iter()
        .find(|(k, _)| k == kind)
        .map(|(_, b)| b)
        .ok_or_else(|| VideoError::Malformed(format!("missing {}", String::from_utf8_lossy(kind))))
}

fn be32(b: &[u8], at: usize) -> Result<u32, VideoError> {
    b.get(at..at + 4)
        .map(|s| u32::from_be_bytes(s.try_into().unwrap()))
        .ok_or_else(|| VideoError::Malformed("truncated field".into()))
}

pub fn read_mp4(file: &[u8]) -> Result<Mp4Info, VideoError> {
    let moov = find(file, b"moov")?;
    let mdia = find(find(moov, b"trak")?, b"mdia")?;
    let mdhd = find(mdia, b"mdhd")?;
    let timescale = be32(mdhd, 12)?;
    let stbl = find(find(mdia, b"minf")?, b"stbl")?;
    let stsd = find(stbl, b"stsd")?;
    let entry = stsd.get(8..).ok_or_else(|| VideoError::Malformed("empty stsd".into()))?;
    let codec: [u8; 4] = entry.get(4..8).ok_or_else(|| VideoError::Malformed("short stsd".into()))?.try_into().unwrap();
    let dims = entry.get(8 + 24..8 + 28).ok_or_else(|| VideoError::Malformed("short sample entry".into()))?;
    let width = u16::from_be_bytes([dims[0], dims[1]]) as u32;
    let height = u16::from_be_bytes([dims[2], dims[3]]) as u32;
    let stts = find(stbl, b"stts")?;
    let sample_delta = if be32(stts, 4)? > 0 { be32(stts, 12)? } else { 0 };
    let stsz = find(stbl, b"stsz")?;
    let frame_count = be32(stsz, 8)?;
    let sample_sizes = (0..frame_count as usize).map(|i| be32(stsz, 12 + 4 * i)).collect::<Result<Vec<_>, _>>()?;
    let chunk_offset = be32(find(stbl, b"stco")?, 8)?;
    Ok(Mp4Info { width, height, frame_count, timescale, sample_delta, codec, sample_sizes, chunk_offset })
}
