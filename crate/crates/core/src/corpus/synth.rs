//! Template-grammar corpus generation and the bundled five-domain suite.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::iob::{validate_iob, IobMode};
use super::types::{DomainDataset, DomainSchema, IobTag, TaggedUtterance};
use crate::error::{Error, Result};
use crate::text::{preprocess, EmbeddingTable};

/// Utterance templates with `{slot}` placeholders and per-slot value lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthGrammar {
    pub templates: Vec<String>,
    pub lexicons: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

fn parse_template(template: &str) -> Result<Vec<Segment>> {
    let mut segments = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .map(|c| open + c)
            .ok_or_else(|| Error::Grammar(format!("unclosed placeholder in '{template}'")))?;
        if open > 0 {
            segments.push(Segment::Text(rest[..open].to_string()));
        }
        let name = rest[open + 1..close].trim();
        if name.is_empty() {
            return Err(Error::Grammar(format!("empty placeholder in '{template}'")));
        }
        segments.push(Segment::Slot(name.to_string()));
        rest = &rest[close + 1..];
    }
    if rest.contains('}') {
        return Err(Error::Grammar(format!("stray '}}' in '{template}'")));
    }
    if !rest.is_empty() {
        segments.push(Segment::Text(rest.to_string()));
    }
    Ok(segments)
}

impl SynthGrammar {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks placeholders against `schema` and rejects empty lexicons.
    pub fn validate(&self, schema: &DomainSchema) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Grammar("grammar has no templates".into()));
        }
        for (slot, values) in &self.lexicons {
            if values.is_empty() {
                return Err(Error::Grammar(format!("lexicon for '{slot}' is empty")));
            }
            if let Some(v) = values.iter().find(|v| preprocess(v).is_empty()) {
                return Err(Error::Grammar(format!(
                    "lexicon for '{slot}' has a value with no tokens: '{v}'"
                )));
            }
        }
        for template in &self.templates {
            let segments = parse_template(template)?;
            let mut n_tokens = 0;
            for seg in &segments {
                match seg {
                    Segment::Text(t) => n_tokens += preprocess(t).len(),
                    Segment::Slot(name) => {
                        if schema.slot(name).is_none() {
                            return Err(Error::Grammar(format!(
                                "placeholder '{{{name}}}' is not a slot of {}",
                                schema.domain
                            )));
                        }
                        if !self.lexicons.contains_key(name) {
                            return Err(Error::Grammar(format!("no lexicon for '{name}'")));
                        }
                        n_tokens += 1;
                    }
                }
            }
            if n_tokens == 0 {
                return Err(Error::Grammar(format!("template '{template}' is empty")));
            }
        }
        Ok(())
    }

    /// Every token the grammar can emit, after preprocessing.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        let mut vocab = BTreeSet::new();
        for t in &self.templates {
            if let Ok(segs) = parse_template(t) {
                for s in segs {
                    if let Segment::Text(text) = s {
                        vocab.extend(preprocess(&text));
                    }
                }
            }
        }
        for values in self.lexicons.values() {
            for v in values {
                vocab.extend(preprocess(v));
            }
        }
        vocab
    }
}

fn generate_one<R: Rng>(templates: &[Vec<Segment>], grammar: &SynthGrammar, rng: &mut R) -> TaggedUtterance {
    let segments = templates.choose(rng).expect("validated non-empty");
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for seg in segments {
        match seg {
            Segment::Text(text) => {
                for tok in preprocess(text) {
                    tokens.push(tok);
                    tags.push(IobTag::O);
                }
            }
            Segment::Slot(name) => {
                let value = grammar.lexicons[name].choose(rng).expect("validated non-empty");
                for (i, tok) in preprocess(value).into_iter().enumerate() {
                    tokens.push(tok);
                    tags.push(if i == 0 {
                        IobTag::B(name.clone())
                    } else {
                        IobTag::I(name.clone())
                    });
                }
            }
        }
    }
    TaggedUtterance { tokens, tags }
}

/// Samples `n` utterances (templates and lexicon values uniformly) into the
/// train split of a dataset. Tags are correct by construction.
pub fn synth_generate(grammar: &SynthGrammar, schema: &DomainSchema, seed: u64, n: usize) -> Result<DomainDataset> {
    synth_generate_split(grammar, schema, seed, n, 0)
}

/// Like [`synth_generate`], also drawing `n_test` test utterances from the
/// same generator stream.
pub fn synth_generate_split(
    grammar: &SynthGrammar,
    schema: &DomainSchema,
    seed: u64,
    n_train: usize,
    n_test: usize,
) -> Result<DomainDataset> {
    schema.validate()?;
    grammar.validate(schema)?;
    let templates = grammar
        .templates
        .iter()
        .map(|t| parse_template(t))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Result<Vec<TaggedUtterance>> {
        (0..n)
            .map(|_| {
                let u = generate_one(&templates, grammar, &mut rng);
                validate_iob(&u.tags, IobMode::Strict)?;
                Ok(u)
            })
            .collect()
    };
    let train = draw(n_train)?;
    let test = draw(n_test)?;
    Ok(DomainDataset {
        schema: schema.clone(),
        train,
        test,
    })
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum LexiconDef {
    Shared(String),
    Values(Vec<String>),
}

#[derive(Clone, Debug, Deserialize)]
struct SuiteGrammarDef {
    templates: Vec<String>,
    lexicons: BTreeMap<String, LexiconDef>,
}

#[derive(Clone, Debug, Deserialize)]
struct SuiteDomainDef {
    schema: DomainSchema,
    grammar: SuiteGrammarDef,
}

/// Words sharing one semantic feature in the generated embedding space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConceptGroup {
    pub feature: String,
    pub words: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
struct SuiteDef {
    held_out: String,
    lexicons: BTreeMap<String, Vec<String>>,
    domains: Vec<SuiteDomainDef>,
    concepts: Vec<ConceptGroup>,
}

/// A set of domain schemas and grammars plus the concept groups used to
/// build an embedding table for them.
#[derive(Clone, Debug)]
pub struct SynthSuite {
    pub domains: Vec<(DomainSchema, SynthGrammar)>,
    pub held_out: String,
    pub concepts: Vec<ConceptGroup>,
}

const BUNDLED_SUITE: &str = include_str!("../../data/synth_suite.json");

impl SynthSuite {
    /// Five toy domains; date, location and count slots recur across them
    /// under different names and descriptions.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SUITE).expect("bundled suite is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let def: SuiteDef = serde_json::from_str(text)?;
        let mut domains = Vec::new();
        for d in def.domains {
            let mut lexicons = BTreeMap::new();
            for (slot, lex) in d.grammar.lexicons {
                let values = match lex {
                    LexiconDef::Values(v) => v,
                    LexiconDef::Shared(name) => {
                        let key = name.strip_prefix('@').unwrap_or(&name);
                        def.lexicons
                            .get(key)
                            .cloned()
                            .ok_or_else(|| Error::Grammar(format!("unknown shared lexicon '{name}'")))?
                    }
                };
                lexicons.insert(slot, values);
            }
            let grammar = SynthGrammar {
                templates: d.grammar.templates,
                lexicons,
            };
            d.schema.validate()?;
            grammar.validate(&d.schema)?;
            domains.push((d.schema, grammar));
        }
        if !domains.iter().any(|(s, _)| s.domain == def.held_out) {
            return Err(Error::Schema(format!("held-out domain '{}' not in suite", def.held_out)));
        }
        Ok(SynthSuite {
            domains,
            held_out: def.held_out,
            concepts: def.concepts,
        })
    }

    /// Generates every domain with a per-domain seed derived from `seed`.
    pub fn generate(&self, seed: u64, n_train: usize, n_test: usize) -> Result<Vec<DomainDataset>> {
        self.domains
            .iter()
            .map(|(schema, grammar)| {
                let domain_seed = seed ^ stable_hash(&schema.domain);
                synth_generate_split(grammar, schema, domain_seed, n_train, n_test)
            })
            .collect()
    }

    pub fn vocabulary(&self) -> BTreeSet<String> {
        let mut vocab = BTreeSet::new();
        for (schema, grammar) in &self.domains {
            vocab.extend(grammar.vocabulary());
            for slot in &schema.slots {
                vocab.extend(slot.description_tokens());
            }
        }
        for group in &self.concepts {
            vocab.extend(group.words.iter().cloned());
        }
        vocab
    }

    /// Embedding table over the suite vocabulary; see [`concept_embeddings`].
    pub fn embeddings(&self, dim: usize, seed: u64) -> Result<EmbeddingTable> {
        let vocab: Vec<String> = self.vocabulary().into_iter().collect();
        concept_embeddings(&vocab, &self.concepts, dim, seed)
    }
}

/// First eight bytes of SHA-256, as a platform-independent seed component.
pub fn stable_hash(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn random_direction(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (3.0 / dim as f64).sqrt();
    (0..dim).map(|_| rng.gen_range(-1.0..1.0) * scale).collect()
}

/// Weight of the word-specific component relative to shared features.
const WORD_NOISE: f64 = 0.6;

/// Embeddings with distributional structure: each word is the sum of one
/// random direction per semantic feature it carries plus a word-specific
/// random component. Words sharing a feature are close, so an averaged
/// description like "pickup location" lands near "departure location".
/// Every vector depends only on `(seed, word, features)`, not on the rest of
/// the vocabulary.
pub fn concept_embeddings(
    vocab: &[String],
    concepts: &[ConceptGroup],
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let mut features: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for g in concepts {
        for w in &g.words {
            features.entry(w.as_str()).or_default().push(g.feature.as_str());
        }
    }
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for word in vocab {
        if !seen.insert(word.as_str()) {
            continue;
        }
        let mut v: Vec<f64> = random_direction(seed ^ stable_hash(&format!("word:{word}")), dim)
            .into_iter()
            .map(|x| x * WORD_NOISE)
            .collect();
        for f in features.get(word.as_str()).into_iter().flatten() {
            let dir = random_direction(seed ^ stable_hash(&format!("feature:{f}")), dim);
            for (a, b) in v.iter_mut().zip(dir) {
                *a += b;
            }
        }
        rows.push((word.clone(), v));
    }
    EmbeddingTable::from_rows(dim, rows, None)
}
