//! Synthetic corpora with planted signals, for end-to-end verification.
//!
//! Three generators, each constructed so that exactly one channel carries
//! the predictive signal:
//!
//! * [`sense_channel_corpus`] — the pun token is the unique token in its
//!   sentence whose inventory holds a gloss containing the trigger token.
//!   Every surface word occurs in exactly one sentence and test words are
//!   disjoint from training words, so token identity generalizes nowhere;
//!   the pronunciation table is empty. Only the gloss route can solve the
//!   test split.
//! * [`pron_channel_corpus`] — the pun token is planted through a phoneme
//!   bigram unique to pun words; the sense inventory is empty and words
//!   are again one-shot, so only the phoneme route generalizes.
//! * [`interpretation_corpus`] — every pun word has five senses, two of
//!   them gold; gold glosses share the instance's planted marker token
//!   with the pun sentence, wrong glosses carry a different marker. The
//!   analytic chance level of the most-frequent-sense baseline is
//!   1/C(5,2).
//!
//! All generators are pure functions of their seed, and they materialize
//! their tables through the same text formats the real parsers read.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::corpus::{
    write_gold_location, write_gold_senses, write_semeval_xml, CorpusError, PunInstance,
};
use crate::lexicon::{parse_cmudict, parse_sense_inventory, PronunciationTable, SenseInventory};
use crate::num::Rng;

/// A generated corpus with its lookup tables.
pub struct SynthCorpus {
    pub train: Vec<PunInstance>,
    pub test: Vec<PunInstance>,
    pub inventory: SenseInventory,
    pub pronunciations: PronunciationTable,
    /// Analytic probability that the most-frequent-sense baseline answers
    /// an interpretation instance correctly (interpretation corpora only).
    pub mfs_chance: Option<f64>,
}

impl SynthCorpus {
    pub fn all_instances(&self) -> Vec<PunInstance> {
        self.train.iter().chain(self.test.iter()).cloned().collect()
    }
}

/// The trigger token planted inside exactly one gloss of each pun word.
pub const SENSE_TRIGGER: &str = "zing";
/// The phoneme bigram unique to pun words.
pub const PRON_BIGRAM: [&str; 2] = ["ZY", "ZQ"];

const GLOSS_VOCAB_SIZE: usize = 30;
const PHONEME_ALPHABET: [&str; 16] = [
    "PA", "PB", "PC", "PD", "PE", "PF", "PG", "PH", "PI", "PJ", "PK", "PL", "PM", "PN", "PO", "PP",
];

fn gloss_word(i: usize) -> String {
    format!("gw{i:02}")
}

struct SentenceSpec {
    words: Vec<String>,
    pun_index: usize,
}

/// Sentences of one-shot words: `count` sentences, each with a fresh pun
/// word and fresh fillers, pun position uniform.
fn one_shot_sentences(rng: &mut Rng, count: usize, offset: usize) -> Vec<SentenceSpec> {
    let mut specs = Vec::with_capacity(count);
    let mut serial = offset;
    for _ in 0..count {
        let len = 6 + rng.below(3); // 6..=8 tokens
        let pun_index = rng.below(len);
        let words = (0..len)
            .map(|i| {
                let w = if i == pun_index {
                    format!("pw{serial:05}_{i}")
                } else {
                    format!("fw{serial:05}_{i}")
                };
                w
            })
            .collect();
        serial += 1;
        specs.push(SentenceSpec { words, pun_index });
    }
    specs
}

fn specs_to_instances(specs: &[SentenceSpec], prefix: &str) -> Vec<PunInstance> {
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let text_id = format!("{prefix}_{i}");
            PunInstance {
                tokens: spec
                    .words
                    .iter()
                    .enumerate()
                    .map(|(t, w)| (format!("{text_id}_{}", t + 1), w.clone()))
                    .collect(),
                gold_pun_token: Some(format!("{text_id}_{}", spec.pun_index + 1)),
                gold_sense_keys: None,
                text_id,
            }
        })
        .collect()
}

fn neutral_gloss(rng: &mut Rng) -> String {
    (0..3)
        .map(|_| gloss_word(rng.below(GLOSS_VOCAB_SIZE)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Corpus where only the sense channel carries signal. Every word has
/// neutral glosses except the pun words, whose inventory contains one
/// trigger gloss at a random rank. Sense counts overlap between pun words
/// (2–3) and fillers (1–3) so the count alone cannot identify the pun.
pub fn sense_channel_corpus(seed: u64, n_train: usize, n_test: usize) -> SynthCorpus {
    sense_corpus_impl(seed, n_train, n_test, None)
}

/// Like [`sense_channel_corpus`] but the trigger gloss sits at the fixed
/// `trigger_rank` of every pun word (which gets `trigger_rank + 1`
/// senses), so sense caps at or below the rank hide the signal entirely.
/// Supports cap sweeps against a known cut-off.
pub fn sense_channel_corpus_at_rank(
    seed: u64,
    n_train: usize,
    n_test: usize,
    trigger_rank: usize,
) -> SynthCorpus {
    sense_corpus_impl(seed, n_train, n_test, Some(trigger_rank))
}

fn sense_corpus_impl(
    seed: u64,
    n_train: usize,
    n_test: usize,
    fixed_trigger_rank: Option<usize>,
) -> SynthCorpus {
    let mut rng = Rng::new(seed);
    let train_specs = one_shot_sentences(&mut rng, n_train, 0);
    let test_specs = one_shot_sentences(&mut rng, n_test, n_train);

    let mut tsv = String::new();
    let mut sense_serial = 0usize;
    for spec in train_specs.iter().chain(test_specs.iter()) {
        for (i, word) in spec.words.iter().enumerate() {
            if i == spec.pun_index {
                let (n_senses, trigger_rank) = match fixed_trigger_rank {
                    Some(rank) => (rank + 1, rank),
                    None => {
                        let n = 2 + rng.below(2); // 2..=3
                        (n, rng.below(n))
                    }
                };
                for rank in 0..n_senses {
                    let gloss = if rank == trigger_rank {
                        format!(
                            "{} {SENSE_TRIGGER} {}",
                            gloss_word(rng.below(GLOSS_VOCAB_SIZE)),
                            gloss_word(rng.below(GLOSS_VOCAB_SIZE))
                        )
                    } else {
                        neutral_gloss(&mut rng)
                    };
                    tsv.push_str(&format!("{word}\t{word}%{sense_serial}::\t{gloss}\n"));
                    sense_serial += 1;
                }
            } else {
                let n_senses = match fixed_trigger_rank {
                    // Keep filler sense counts level with the pun words'.
                    Some(rank) => rank + 1,
                    None => 1 + rng.below(3), // 1..=3
                };
                for _ in 0..n_senses {
                    let gloss = neutral_gloss(&mut rng);
                    tsv.push_str(&format!("{word}\t{word}%{sense_serial}::\t{gloss}\n"));
                    sense_serial += 1;
                }
            }
        }
    }

    SynthCorpus {
        train: specs_to_instances(&train_specs, "syn"),
        test: specs_to_instances(&test_specs, "tst"),
        inventory: parse_sense_inventory(tsv.as_bytes()).expect("generated inventory parses"),
        pronunciations: parse_cmudict(";;; no entries\n".as_bytes()).expect("empty table parses"),
        mfs_chance: None,
    }
}

/// Corpus where only the pronunciation channel carries signal: pun words
/// contain the unique phoneme bigram, fillers never use its symbols, and
/// the sense inventory is empty.
pub fn pron_channel_corpus(seed: u64, n_train: usize, n_test: usize) -> SynthCorpus {
    let mut rng = Rng::new(seed);
    let train_specs = one_shot_sentences(&mut rng, n_train, 0);
    let test_specs = one_shot_sentences(&mut rng, n_test, n_train);

    let mut dict = String::new();
    for spec in train_specs.iter().chain(test_specs.iter()) {
        for (i, word) in spec.words.iter().enumerate() {
            let mut phonemes: Vec<&str> = (0..3 + rng.below(3))
                .map(|_| PHONEME_ALPHABET[rng.below(PHONEME_ALPHABET.len())])
                .collect();
            if i == spec.pun_index {
                let at = rng.below(phonemes.len() + 1);
                phonemes.insert(at, PRON_BIGRAM[1]);
                phonemes.insert(at, PRON_BIGRAM[0]);
            }
            dict.push_str(&format!(
                "{}  {}\n",
                word.to_uppercase(),
                phonemes.join(" ")
            ));
        }
    }

    SynthCorpus {
        train: specs_to_instances(&train_specs, "syn"),
        test: specs_to_instances(&test_specs, "tst"),
        inventory: parse_sense_inventory("".as_bytes()).expect("empty inventory parses"),
        pronunciations: parse_cmudict(dict.as_bytes()).expect("generated dictionary parses"),
        mfs_chance: None,
    }
}

const MARKERS: [&str; 4] = ["marka", "markb", "markc", "markd"];
const CONTEXT_VOCAB_SIZE: usize = 60;
const SENSES_PER_PUN: usize = 5;

/// Interpretation corpus: each instance's pun word has five senses, two
/// gold. Gold glosses contain the same marker token as the pun sentence;
/// wrong glosses contain a different marker. Test pun words (and their
/// sense keys) never occur in training, so only marker matching carries
/// over. The most-frequent-sense baseline is right exactly when the two
/// gold senses landed on ranks 0 and 1, i.e. with probability 1/C(5,2).
pub fn interpretation_corpus(seed: u64, n_train: usize, n_test: usize) -> SynthCorpus {
    let mut rng = Rng::new(seed);
    let mut tsv = String::new();
    let mut make_split = |count: usize, prefix: &str, offset: usize| -> Vec<PunInstance> {
        let mut instances = Vec::with_capacity(count);
        for i in 0..count {
            let serial = offset + i;
            let pun_word = format!("pw{serial:05}");
            let marker = MARKERS[rng.below(MARKERS.len())];

            // Sentence: five context words plus the marker plus the pun
            // word, shuffled so position carries nothing.
            let mut words: Vec<String> = (0..5)
                .map(|_| format!("cw{:02}", rng.below(CONTEXT_VOCAB_SIZE)))
                .collect();
            words.push(marker.to_string());
            words.push(pun_word.clone());
            rng.shuffle(&mut words);
            let pun_index = words.iter().position(|w| *w == pun_word).expect("present");

            // Two gold ranks among the five senses.
            let g1 = rng.below(SENSES_PER_PUN);
            let g2 = loop {
                let c = rng.below(SENSES_PER_PUN);
                if c != g1 {
                    break c;
                }
            };
            let mut gold_keys = std::collections::BTreeSet::new();
            for rank in 0..SENSES_PER_PUN {
                let key = format!("{pun_word}%{rank}::");
                let gloss_marker = if rank == g1 || rank == g2 {
                    marker.to_string()
                } else {
                    // A wrong marker, never the instance's own.
                    loop {
                        let m = MARKERS[rng.below(MARKERS.len())];
                        if m != marker {
                            break m.to_string();
                        }
                    }
                };
                let gloss = format!(
                    "{gloss_marker} {} {}",
                    gloss_word(rng.below(GLOSS_VOCAB_SIZE)),
                    gloss_word(rng.below(GLOSS_VOCAB_SIZE))
                );
                tsv.push_str(&format!("{pun_word}\t{key}\t{gloss}\n"));
                if rank == g1 || rank == g2 {
                    gold_keys.insert(key);
                }
            }

            let text_id = format!("{prefix}_{i}");
            instances.push(PunInstance {
                tokens: words
                    .iter()
                    .enumerate()
                    .map(|(t, w)| (format!("{text_id}_{}", t + 1), w.clone()))
                    .collect(),
                gold_pun_token: Some(format!("{text_id}_{}", pun_index + 1)),
                gold_sense_keys: Some(gold_keys),
                text_id,
            });
        }
        instances
    };

    let train = make_split(n_train, "syn", 0);
    let test = make_split(n_test, "tst", n_train);
    let pairs_of_five = (SENSES_PER_PUN * (SENSES_PER_PUN - 1) / 2) as f64;
    SynthCorpus {
        train,
        test,
        inventory: parse_sense_inventory(tsv.as_bytes()).expect("generated inventory parses"),
        pronunciations: parse_cmudict(";;; no entries\n".as_bytes()).expect("empty table parses"),
        mfs_chance: Some(1.0 / pairs_of_five),
    }
}

/// A two-sentence fixture exercising every branch at once: words with
/// senses, phonemes, both, and neither, plus gold keys for pair building.
/// Meant for gradient checks at tiny dimensions.
pub fn gradcheck_fixture() -> (Vec<PunInstance>, SenseInventory, PronunciationTable) {
    let tsv = "\
mark\tmark%1::\tthe zing gloss one
mark\tmark%2::\tplain words here
stone\tstone%1::\tcompletely plain gloss
brick\tbrick%1::\tanother plain gloss
brick\tbrick%2::\tyet more words
";
    let cmu = "MARK  M AA1 R K\nSTONE  S T OW1 N\nQQQ  K Y UW1\n";
    let inventory = parse_sense_inventory(tsv.as_bytes()).expect("fixture inventory parses");
    let pronunciations = parse_cmudict(cmu.as_bytes()).expect("fixture dictionary parses");

    let make = |text_id: &str, words: &[&str], gold: usize, keys: &[&str]| PunInstance {
        text_id: text_id.to_string(),
        tokens: words
            .iter()
            .enumerate()
            .map(|(i, w)| (format!("{text_id}_{}", i + 1), w.to_string()))
            .collect(),
        gold_pun_token: Some(format!("{text_id}_{}", gold + 1)),
        gold_sense_keys: if keys.is_empty() {
            None
        } else {
            Some(keys.iter().map(|k| k.to_string()).collect())
        },
    };
    let instances = vec![
        make(
            "fix_1",
            &["mark", "stone", "dust"],
            0,
            &["mark%1::", "mark%2::"],
        ),
        make(
            "fix_2",
            &["qqq", "brick", "mark"],
            1,
            &["brick%1::", "brick%2::"],
        ),
    ];
    (instances, inventory, pronunciations)
}

/// The worked homographic pun ("I used to be a banker but I lose
/// interest.") with the four candidate senses of "interest" in inventory
/// order and the two gold keys.
pub fn interest_fixture() -> (PunInstance, SenseInventory) {
    let words = [
        "I", "used", "to", "be", "a", "banker", "but", "I", "lose", "interest", ".",
    ];
    let instance = PunInstance {
        text_id: "hom_1".into(),
        tokens: words
            .iter()
            .enumerate()
            .map(|(i, w)| (format!("hom_1_{}", i + 1), w.to_string()))
            .collect(),
        gold_pun_token: Some("hom_1_10".into()),
        gold_sense_keys: Some(
            ["interest%1:09:00::", "interest%1:21:00::"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        ),
    };
    let tsv = "\
interest\tinterest%1:09:00::\ta sense of concern with and curiosity about someone or something
interest\tinterest%1:07:01::\ta reason for wanting something done
interest\tinterest%2:37:00::\texcite the curiosity of; engage the interest of
interest\tinterest%1:21:00::\ta fixed charge for borrowing money; usually a percentage of the amount borrowed
";
    (
        instance,
        parse_sense_inventory(tsv.as_bytes()).expect("fixture inventory parses"),
    )
}

/// Files written by [`write_corpus_files`].
pub struct CorpusFiles {
    pub xml: PathBuf,
    pub gold_location: PathBuf,
    pub gold_senses: PathBuf,
    pub cmudict: PathBuf,
    pub sense_tsv: PathBuf,
}

/// Materialize a corpus in the external formats the parsers read.
/// The XML holds train and test instances in order.
pub fn write_corpus_files(dir: &Path, corpus: &SynthCorpus) -> Result<CorpusFiles, CorpusError> {
    std::fs::create_dir_all(dir)?;
    let instances = corpus.all_instances();
    let files = CorpusFiles {
        xml: dir.join("puns.xml"),
        gold_location: dir.join("gold_location.tsv"),
        gold_senses: dir.join("gold_senses.tsv"),
        cmudict: dir.join("cmudict.txt"),
        sense_tsv: dir.join("senses.tsv"),
    };
    std::fs::write(&files.xml, write_semeval_xml(&instances))?;

    let locations: BTreeMap<String, String> = instances
        .iter()
        .filter_map(|inst| {
            inst.gold_pun_token
                .as_ref()
                .map(|tok| (inst.text_id.clone(), tok.clone()))
        })
        .collect();
    std::fs::write(&files.gold_location, write_gold_location(&locations))?;

    let senses: BTreeMap<String, std::collections::BTreeSet<String>> = instances
        .iter()
        .filter_map(|inst| match (&inst.gold_pun_token, &inst.gold_sense_keys) {
            (Some(tok), Some(keys)) => Some((tok.clone(), keys.clone())),
            _ => None,
        })
        .collect();
    std::fs::write(&files.gold_senses, write_gold_senses(&senses))?;

    std::fs::write(&files.cmudict, corpus.pronunciations.canonical_dump())?;
    std::fs::write(&files.sense_tsv, corpus.inventory.canonical_dump())?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_gold_location, parse_semeval_xml};

    #[test]
    fn sense_corpus_plants_exactly_one_trigger_word_per_sentence() {
        let corpus = sense_channel_corpus(7, 20, 10);
        assert_eq!(corpus.train.len(), 20);
        assert_eq!(corpus.test.len(), 10);
        for inst in corpus.all_instances() {
            let trigger_tokens: Vec<&str> = inst
                .tokens
                .iter()
                .filter(|(_, w)| {
                    corpus
                        .inventory
                        .senses(w)
                        .iter()
                        .any(|s| s.gloss.split_whitespace().any(|t| t == SENSE_TRIGGER))
                })
                .map(|(id, _)| id.as_str())
                .collect();
            assert_eq!(trigger_tokens.len(), 1, "{}", inst.text_id);
            assert_eq!(
                trigger_tokens[0],
                inst.gold_pun_token.as_deref().unwrap(),
                "trigger word must be the gold pun"
            );
            // Every token has at least one sense, so sense presence alone
            // cannot reveal the pun.
            for (_, w) in &inst.tokens {
                assert!(!corpus.inventory.senses(w).is_empty());
            }
        }
        // No pronunciations at all.
        assert!(corpus.pronunciations.is_empty());
    }

    #[test]
    fn sense_corpus_words_are_one_shot_and_split_disjoint() {
        let corpus = sense_channel_corpus(7, 15, 8);
        let mut seen = std::collections::BTreeSet::new();
        for inst in corpus.all_instances() {
            for (_, w) in &inst.tokens {
                assert!(seen.insert(w.clone()), "word `{w}` appears twice");
            }
        }
    }

    #[test]
    fn pron_corpus_bigram_is_unique_to_pun_words() {
        let corpus = pron_channel_corpus(7, 20, 10);
        for inst in corpus.all_instances() {
            let gold = inst.gold_pun_token.as_deref().unwrap();
            for (id, w) in &inst.tokens {
                let phonemes = corpus.pronunciations.lookup_phonemes(w);
                assert!(!phonemes.is_empty(), "every word has phonemes");
                let has_bigram = phonemes
                    .windows(2)
                    .any(|w| w[0] == PRON_BIGRAM[0] && w[1] == PRON_BIGRAM[1]);
                let has_symbol = phonemes
                    .iter()
                    .any(|p| p == PRON_BIGRAM[0] || p == PRON_BIGRAM[1]);
                if id == gold {
                    assert!(has_bigram, "pun word must carry the bigram");
                } else {
                    assert!(!has_symbol, "fillers must avoid the bigram symbols");
                }
            }
        }
        assert!(corpus.inventory.is_empty());
    }

    #[test]
    fn interpretation_corpus_marker_rule_and_chance_level() {
        let corpus = interpretation_corpus(7, 12, 6);
        assert_eq!(corpus.mfs_chance, Some(0.1));
        for inst in corpus.all_instances() {
            let gold_keys = inst.gold_sense_keys.as_ref().unwrap();
            assert_eq!(gold_keys.len(), 2);
            let pun_surface = inst
                .surface_of(inst.gold_pun_token.as_deref().unwrap())
                .unwrap();
            let senses = corpus.inventory.senses(pun_surface);
            assert_eq!(senses.len(), 5);
            // The marker in the sentence appears in gold glosses only.
            let sentence_marker = inst
                .tokens
                .iter()
                .map(|(_, w)| w.as_str())
                .find(|w| MARKERS.contains(w))
                .expect("sentence has a marker");
            for sense in senses {
                let gloss_has = sense.gloss.split_whitespace().any(|t| t == sentence_marker);
                assert_eq!(gloss_has, gold_keys.contains(&sense.sense_key));
            }
        }
    }

    #[test]
    fn generators_are_deterministic_per_seed() {
        let a = sense_channel_corpus(9, 5, 3);
        let b = sense_channel_corpus(9, 5, 3);
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.inventory.canonical_dump(), b.inventory.canonical_dump());
        let c = sense_channel_corpus(10, 5, 3);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn written_files_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = interpretation_corpus(3, 4, 2);
        let files = write_corpus_files(dir.path(), &corpus).unwrap();
        let xml = std::fs::read_to_string(&files.xml).unwrap();
        let (instances, warnings) = parse_semeval_xml(&xml).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(instances.len(), 6);
        let gold = parse_gold_location(
            std::fs::read_to_string(&files.gold_location)
                .unwrap()
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(gold.len(), 6);
        let inv = parse_sense_inventory(
            std::fs::read_to_string(&files.sense_tsv)
                .unwrap()
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(inv.len(), corpus.inventory.len());
    }

    #[test]
    fn interest_pairs_are_the_worked_example() {
        use crate::corpus::{build_pun_gloss_pairs, PairLabel};
        let (instance, inventory) = interest_fixture();
        let (pairs, warnings) = build_pun_gloss_pairs(&instance, &inventory).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(pairs.len(), 4);
        let labels: Vec<PairLabel> = pairs.iter().map(|p| p.label).collect();
        assert_eq!(
            labels,
            vec![PairLabel::Yes, PairLabel::No, PairLabel::No, PairLabel::Yes]
        );
    }
}
