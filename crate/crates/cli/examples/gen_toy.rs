//! Regenerates the bundled toy corpus (`assets/toy` by default): two
//! speakers x two sentences x three emotions of harmonic-rich synthetic
//! speech with matching phoneme alignments. Fully deterministic — no RNG —
//! so the checked-in files can be reproduced byte-for-byte.
//!
//!     cargo run -p imix-cli --example gen_toy -- [out_dir]

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

const SAMPLE_RATE: u32 = 22050;
const DURATION_S: f64 = 0.6;

struct Voice {
    speaker: &'static str,
    base_f0: f64,
}

struct Emotion {
    name: &'static str,
    f0_offset: f64,
    amplitude: f64,
}

struct Sentence {
    id: &'static str,
    phonemes: [&'static str; 4],
    f0_scale: f64,
}

const VOICES: [Voice; 2] = [
    Voice { speaker: "s1", base_f0: 170.0 },
    Voice { speaker: "s2", base_f0: 225.0 },
];

const EMOTIONS: [Emotion; 3] = [
    Emotion { name: "neutral", f0_offset: 0.0, amplitude: 0.50 },
    Emotion { name: "happy", f0_offset: 40.0, amplitude: 0.65 },
    Emotion { name: "sad", f0_offset: -30.0, amplitude: 0.40 },
];

const SENTENCES: [Sentence; 2] = [
    Sentence { id: "u1", phonemes: ["AA", "B", "IY", "S"], f0_scale: 1.0 },
    Sentence { id: "u2", phonemes: ["M", "EH", "N", "T"], f0_scale: 0.95 },
];

fn main() {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from("assets/toy"), PathBuf::from);
    for voice in &VOICES {
        for emotion in &EMOTIONS {
            let dir = out.join(voice.speaker).join(emotion.name);
            std::fs::create_dir_all(&dir).expect("create corpus dir");
            for sentence in &SENTENCES {
                write_wav(&dir.join(format!("{}.wav", sentence.id)), voice, emotion, sentence);
                write_alignment(&dir.join(format!("{}.tsv", sentence.id)), sentence);
            }
        }
    }
    println!("toy corpus written to {}", out.display());
    println!("next: cargo run -p imix-cli -- manifest {}", out.display());
}

/// Three-harmonic tone with slow vibrato and a gentle onset/offset ramp.
fn write_wav(path: &Path, voice: &Voice, emotion: &Emotion, sentence: &Sentence) {
    let n = (DURATION_S * SAMPLE_RATE as f64) as usize;
    let f0 = (voice.base_f0 + emotion.f0_offset) * sentence.f0_scale;
    let mut phase = 0.0f64;
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).expect("create wav");
    for i in 0..n {
        let t = i as f64 / SAMPLE_RATE as f64;
        let inst_f0 = f0 * (1.0 + 0.015 * (TAU * 3.0 * t).sin());
        phase += TAU * inst_f0 / SAMPLE_RATE as f64;
        let harmonic =
            0.62 * phase.sin() + 0.24 * (2.0 * phase).sin() + 0.10 * (3.0 * phase).sin();
        let ramp = (t / 0.02).min((DURATION_S - t) / 0.02).min(1.0);
        let sample = emotion.amplitude * ramp * harmonic;
        writer
            .write_sample((sample * 32767.0).round() as i16)
            .expect("write sample");
    }
    writer.finalize().expect("finalize wav");
}

/// Four phonemes tiling [0, 0.6] in equal 0.15 s spans.
fn write_alignment(path: &Path, sentence: &Sentence) {
    let mut text = String::from("# phoneme\tstart\tend\n");
    for (k, p) in sentence.phonemes.iter().enumerate() {
        let start = 0.15 * k as f64;
        let end = 0.15 * (k + 1) as f64;
        text.push_str(&format!("{p}\t{start}\t{end}\n"));
    }
    std::fs::write(path, text).expect("write alignment");
}
