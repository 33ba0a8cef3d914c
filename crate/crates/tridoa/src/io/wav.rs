//! Three-channel PCM WAV input and output.

use std::io::{Read, Seek};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("expected 3 channels, found {0}")]
    ChannelCount(u16),
    #[error("unsupported sample encoding: {bits}-bit {format}")]
    UnsupportedEncoding { format: &'static str, bits: u16 },
    #[error("file is truncated")]
    Truncated,
    #[error("malformed WAV file: {0}")]
    Malformed(String),
}

/// Sample encoding of a PCM stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PcmFormat {
    S16,
    S32,
    F32,
}

impl PcmFormat {
    pub fn bytes(self) -> usize {
        match self {
            PcmFormat::S16 => 2,
            PcmFormat::S32 | PcmFormat::F32 => 4,
        }
    }

    fn spec(self, fs: u32) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            PcmFormat::S16 => (16, SampleFormat::Int),
            PcmFormat::S32 => (32, SampleFormat::Int),
            PcmFormat::F32 => (32, SampleFormat::Float),
        };
        WavSpec {
            channels: 3,
            sample_rate: fs,
            bits_per_sample,
            sample_format,
        }
    }

    /// Decodes one little-endian sample, normalized so that full scale maps
    /// to `[-1, 1]`.
    pub fn decode(self, b: &[u8]) -> f64 {
        match self {
            PcmFormat::S16 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
            PcmFormat::S32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
            PcmFormat::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        }
    }
}

/// Decoded three-channel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub fs: u32,
    pub channels: [Vec<f64>; 3],
}

impl Audio {
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_slices(&self) -> [&[f64]; 3] {
        [&self.channels[0], &self.channels[1], &self.channels[2]]
    }
}

fn map_hound(e: hound::Error) -> AudioError {
    match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            AudioError::Truncated
        }
        // hound's wording when the data chunk ends early
        hound::Error::IoError(io) if io.to_string().contains("enough bytes") => AudioError::Truncated,
        hound::Error::IoError(io) => AudioError::Malformed(io.to_string()),
        hound::Error::Unsupported => AudioError::Malformed("unsupported WAV feature".into()),
        other => AudioError::Malformed(other.to_string()),
    }
}

/// Reads a 3-channel WAV from any seekable source.
pub fn decode_wav<R: Read + Seek>(source: R) -> Result<Audio, AudioError> {
    let mut reader = WavReader::new(source).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.channels != 3 {
        return Err(AudioError::ChannelCount(spec.channels));
    }
    let declared = reader.len() as usize;
    let mut interleaved = Vec::with_capacity(declared);
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => {
            for s in reader.samples::<i16>() {
                interleaved.push(s.map_err(map_hound)? as f64 / 32768.0);
            }
        }
        (SampleFormat::Int, 32) => {
            for s in reader.samples::<i32>() {
                interleaved.push(s.map_err(map_hound)? as f64 / 2_147_483_648.0);
            }
        }
        (SampleFormat::Float, 32) => {
            for s in reader.samples::<f32>() {
                interleaved.push(s.map_err(map_hound)? as f64);
            }
        }
        (format, bits) => {
            return Err(AudioError::UnsupportedEncoding {
                format: match format {
                    SampleFormat::Int => "integer",
                    SampleFormat::Float => "float",
                },
                bits,
            })
        }
    }
    if interleaved.len() < declared || interleaved.len() % 3 != 0 {
        return Err(AudioError::Truncated);
    }
    let frames = interleaved.len() / 3;
    let mut channels: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(frames));
    for frame in interleaved.chunks_exact(3) {
        for (c, &v) in channels.iter_mut().zip(frame) {
            c.push(v);
        }
    }
    Ok(Audio {
        fs: spec.sample_rate,
        channels,
    })
}

pub fn read_audio(path: &Path) -> Result<Audio> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_wav(std::io::BufReader::new(file)).map_err(|source| Error::Audio {
        path: path.to_owned(),
        source,
    })
}

/// Writes three equal-length channels. Integer formats are clipped to full
/// scale.
pub fn write_audio(path: &Path, channels: [&[f64]; 3], fs: u32, format: PcmFormat) -> Result<()> {
    let n = channels[0].len();
    if channels.iter().any(|c| c.len() != n) {
        return Err(Error::Invalid("channels must have equal length".into()));
    }
    let wrap = |e: hound::Error| Error::Audio {
        path: path.to_owned(),
        source: map_hound(e),
    };
    let mut w = WavWriter::create(path, format.spec(fs)).map_err(wrap)?;
    for i in 0..n {
        for c in &channels {
            let v = c[i];
            match format {
                PcmFormat::S16 => w
                    .write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
                    .map_err(wrap)?,
                PcmFormat::S32 => w
                    .write_sample(
                        (v * 2_147_483_648.0)
                            .round()
                            .clamp(-2_147_483_648.0, 2_147_483_647.0) as i32,
                    )
                    .map_err(wrap)?,
                PcmFormat::F32 => w.write_sample(v as f32).map_err(wrap)?,
            }
        }
    }
    w.finalize().map_err(wrap)
}
