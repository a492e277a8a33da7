//! Seeded synthetic agricultural corpus shared by integration tests.
#![allow(dead_code)]

pub mod documents;
pub mod oracle;

use advisor_core::{Chunk, EmbeddingProvider, HashingEmbedder, SourceKind, VectorIndex};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOPICS: &[(&str, &[&str])] = &[
    ("ধান > রোগ", &["ব্লাস্ট", "পাতা", "দাগ", "ছত্রাক", "ট্রাইসাইক্লাজোল", "ঝলসানো", "শীষ", "বাদামি"]),
    ("ধান > সার", &["ইউরিয়া", "টিএসপি", "এমওপি", "কিস্তি", "জিপসাম", "দস্তা", "কুশি", "বোরো"]),
    ("পাট > বপন", &["পাট", "বীজ", "বপন", "সারি", "চৈত্র", "তোষা", "দেশি", "আঁশ"]),
    ("আলু > রোগ", &["আলু", "মড়ক", "ম্যানকোজেব", "কুয়াশা", "লেট", "ব্লাইট", "কন্দ", "হিমাগার"]),
    ("মাছ > পুকুর", &["পুকুর", "চুন", "পোনা", "রুই", "কাতলা", "অক্সিজেন", "খৈল", "জাল"]),
    ("গবাদিপশু > খাদ্য", &["গরু", "খড়", "ঘাস", "দানাদার", "ভুসি", "লবণ", "বাছুর", "দুধ"]),
    ("সবজি > পোকা", &["বেগুন", "ডগা", "ফল", "ছিদ্রকারী", "ফেরোমন", "ফাঁদ", "টমেটো", "মাছি"]),
    ("সেচ > পানি", &["সেচ", "নালা", "এডব্লিউডি", "পাইপ", "ভূগর্ভস্থ", "খরা", "জলাবদ্ধতা", "পাম্প"]),
];

pub const GENERAL: &[&str] = &[
    "জমিতে", "প্রয়োগ", "করুন", "কৃষক", "সময়", "মাত্রা", "হেক্টর", "কেজি", "সপ্তাহ", "পর",
    "পরামর্শ", "ফসল", "উৎপাদন", "ভালো", "নিয়মিত", "পরিদর্শন", "মাঠ", "দিন",
];

pub fn sentence(rng: &mut ChaCha8Rng, topic: usize) -> String {
    let n = rng.random_range(6..=14);
    let words: Vec<&str> = (0..n)
        .map(|_| {
            if rng.random_bool(0.6) {
                *TOPICS[topic].1.choose(rng).unwrap()
            } else {
                *GENERAL.choose(rng).unwrap()
            }
        })
        .collect();
    format!("{}।", words.join(" "))
}

/// `n` chunks of 10 to 20 sentences, each drawn from one topic.
pub fn synthetic_chunks(n: usize, seed: u64) -> Vec<Chunk> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let topic = rng.random_range(0..TOPICS.len());
            let count = rng.random_range(10..=20);
            let text = (0..count).map(|_| sentence(&mut rng, topic)).collect::<Vec<_>>().join(" ");
            let doc = format!("doc{:03}", i / 10);
            let ordinal = (i % 10) as u32;
            Chunk {
                chunk_id: format!("{doc}-{ordinal:04}"),
                doc_id: doc,
                ordinal,
                token_count: advisor_core::text::token_count(&text) as u32,
                text,
                topic: TOPICS[topic].0.to_owned(),
                structural_position: f64::from(ordinal) / 10.0,
                source_kind: SourceKind::Handbook,
            }
        })
        .collect()
}

pub fn build_index(chunks: &[Chunk], provider: &HashingEmbedder) -> VectorIndex {
    let mut index = VectorIndex::with_defaults(provider.dims(), provider.name());
    let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let vectors = provider.embed_batch(&texts).unwrap();
    for (c, v) in chunks.iter().zip(vectors) {
        index.add(c.clone(), v).unwrap();
    }
    index
}

pub const QUERIES: [&str; 10] = [
    "ধানের পাতায় ব্লাস্ট রোগের দাগ হলে কী করব",
    "বোরো ধানে ইউরিয়া কয় কিস্তিতে দিতে হয়",
    "পাট বীজ বপনের সঠিক সময় কখন",
    "আলুর মড়ক রোগে ম্যানকোজেব কতটুকু দেব",
    "পুকুরে চুন প্রয়োগের মাত্রা",
    "গরুকে খড় আর দানাদার খাদ্য কতটা দেব",
    "বেগুনের ডগা ও ফল ছিদ্রকারী পোকা দমন",
    "খরার সময় সেচ দেওয়ার নিয়ম",
    "টমেটো গাছে ফেরোমন ফাঁদ",
    "কৃষক মাঠ পরিদর্শন",
];
