//! 16-bit PCM RIFF/WAVE reading and writing.

use std::io::{Read, Seek, Write};
use std::path::Path;

use super::{PcmBuffer, RenderError};

pub fn read_wav(path: impl AsRef<Path>) -> Result<PcmBuffer, RenderError> {
    let reader = hound::WavReader::open(path)?;
    from_reader(reader)
}

pub fn read_wav_from<R: Read>(input: R) -> Result<PcmBuffer, RenderError> {
    from_reader(hound::WavReader::new(input)?)
}

fn from_reader<R: Read>(reader: hound::WavReader<R>) -> Result<PcmBuffer, RenderError> {
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(RenderError::UnsupportedFormat(format!(
            "{:?} {}-bit; only 16-bit integer PCM is supported",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(RenderError::UnsupportedFormat(format!(
            "{} channels; only mono and stereo are supported",
            spec.channels
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .collect::<Result<Vec<_>, _>>()?;
    PcmBuffer::new(spec.sample_rate, spec.channels, samples)
}

pub fn write_wav(buffer: &PcmBuffer, path: impl AsRef<Path>) -> Result<(), RenderError> {
    let writer = hound::WavWriter::create(path, spec_of(buffer))?;
    write_samples(writer, buffer)
}

pub fn write_wav_to<W: Write + Seek>(buffer: &PcmBuffer, out: W) -> Result<(), RenderError> {
    let writer = hound::WavWriter::new(out, spec_of(buffer))?;
    write_samples(writer, buffer)
}

fn spec_of(buffer: &PcmBuffer) -> hound::WavSpec {
    hound::WavSpec {
        channels: buffer.channels,
        sample_rate: buffer.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

fn write_samples<W: Write + Seek>(
    writer: hound::WavWriter<W>,
    buffer: &PcmBuffer,
) -> Result<(), RenderError> {
    let mut writer = writer;
    {
        let mut fast = writer.get_i16_writer(buffer.samples.len() as u32);
        for &s in &buffer.samples {
            fast.write_sample(s);
        }
        fast.flush()?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn reads_mono_silence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        let buf = PcmBuffer::new(44_100, 1, vec![0; 44_100]).unwrap();
        write_wav(&buf, &path).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples.len(), 44_100);
        assert!(back.samples.iter().all(|&s| s == 0));
        assert_eq!(back.channels, 1);
    }

    #[test]
    fn file_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        let b = dir.path().join("b.wav");
        let samples: Vec<i16> = (0..2000)
            .map(|i| ((i * 7919) % 65536 - 32768) as i16)
            .collect();
        write_wav(&PcmBuffer::new(22_050, 2, samples).unwrap(), &a).unwrap();
        write_wav(&read_wav(&a).unwrap(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn float_wav_is_unsupported() {
        let mut bytes = Cursor::new(Vec::new());
        {
            let spec = hound::WavSpec {
                channels: 1,
                sample_rate: 44_100,
                bits_per_sample: 32,
                sample_format: hound::SampleFormat::Float,
            };
            let mut w = hound::WavWriter::new(&mut bytes, spec).unwrap();
            w.write_sample(0.5f32).unwrap();
            w.finalize().unwrap();
        }
        bytes.set_position(0);
        assert!(matches!(
            read_wav_from(bytes),
            Err(RenderError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn compressed_wav_is_rejected() {
        // minimal RIFF header declaring format tag 2 (ADPCM)
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&36u32.to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&2u16.to_le_bytes());
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&44_100u32.to_le_bytes());
        b.extend_from_slice(&88_200u32.to_le_bytes());
        b.extend_from_slice(&2u16.to_le_bytes());
        b.extend_from_slice(&16u16.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&0u32.to_le_bytes());
        assert!(read_wav_from(Cursor::new(b)).is_err());
    }
}
