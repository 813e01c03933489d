//! IOB-tagged utterances, domain schemas with slot descriptions, dataset
//! files, splitting for learning-curve experiments and synthetic corpora.

pub mod io;
pub mod iob;
pub mod split;
pub mod synth;
pub mod types;

pub use io::{load_domain_dir, load_suite, parse_dataset, parse_dataset_with, parse_utterances, save_domain_dir, write_utterances};
pub use iob::{project_slot, validate_iob, IobMode, IobWarning};
pub use split::{split_dev, subsample, subsample_with, SubsampleMode};
pub use synth::{concept_embeddings, stable_hash, synth_generate, synth_generate_split, ConceptGroup, SynthGrammar, SynthSuite};
pub use types::{Bio, DomainDataset, DomainSchema, IobTag, SlotDef, TaggedUtterance};
