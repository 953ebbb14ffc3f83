//! Mono WAV I/O. Output is always 32-bit float; input accepts 32-bit float
//! and 16-bit PCM (rescaled), mono only.

use std::io::{Read, Seek};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::AudioSignal;

pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    for &s in signal.samples() {
        writer
            .write_sample(s)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    Ok(())
}

pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav_from(std::io::BufReader::new(file))
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

/// Decodes a WAV stream into a mono signal.
pub fn read_wav_from<R: Read + Seek>(reader: R) -> Result<AudioSignal> {
    let mut wav = hound::WavReader::new(reader)
        .map_err(|e| Error::parse("wav", e.to_string()))?;
    let spec = wav.spec();
    if spec.channels != 1 {
        return Err(Error::parse(
            "wav",
            format!("expected mono audio, got {} channels", spec.channels),
        ));
    }
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => wav
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse("wav", e.to_string()))?,
        (hound::SampleFormat::Int, 16) => wav
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse("wav", e.to_string()))?,
        (format, bits) => {
            return Err(Error::parse(
                "wav",
                format!("unsupported sample format {format:?}/{bits}"),
            ))
        }
    };
    AudioSignal::new(samples, spec.sample_rate)
        .map_err(|e| Error::parse("wav", e.to_string()))
}
