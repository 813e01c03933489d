use crate::corpus::{project_slot, Bio, DomainSchema, SlotDef, TaggedUtterance};

/// One concept-tagger training example: a slot and the per-token B/I/O
/// labels of the utterance with respect to that slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtExample<'a> {
    pub slot: &'a SlotDef,
    pub labels: Vec<Bio>,
    /// Whether the slot occurs in the utterance.
    pub positive: bool,
}

/// One example per schema slot, including slots absent from the utterance.
pub fn ct_make_examples<'a>(utt: &TaggedUtterance, schema: &'a DomainSchema) -> Vec<CtExample<'a>> {
    schema
        .slots
        .iter()
        .map(|slot| {
            let (labels, positive) = project_slot(&utt.tags, &slot.name);
            CtExample { slot, labels, positive }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::IobTag;

    fn schema(names: &[&str]) -> DomainSchema {
        DomainSchema::new("flights", names.iter().map(|n| SlotDef::new(*n, n.to_lowercase())).collect()).unwrap()
    }

    fn utt() -> TaggedUtterance {
        let tokens = "find flights to new york tomorrow".split(' ').map(String::from).collect();
        let tags = "O O O B-Dest I-Dest B-Date".split(' ').map(|t| t.parse::<IobTag>().unwrap()).collect();
        TaggedUtterance::new(tokens, tags).unwrap()
    }

    #[test]
    fn positives_and_negatives() {
        let s = schema(&["Origin", "Dest", "Date", "Time", "Airline", "Class", "Fare", "Stops", "Seats"]);
        let ex = ct_make_examples(&utt(), &s);
        assert_eq!(ex.len(), 9);
        assert_eq!(ex.iter().filter(|e| e.positive).count(), 2);
        let dest = ex.iter().find(|e| e.slot.name == "Dest").unwrap();
        assert_eq!(dest.labels, vec![Bio::O, Bio::O, Bio::O, Bio::B, Bio::I, Bio::O]);
    }

    #[test]
    fn all_outside_and_single_slot() {
        let mut u = utt();
        u.tags = vec![IobTag::O; 6];
        let abc = schema(&["A", "B", "C"]);
        let ex = ct_make_examples(&u, &abc);
        assert_eq!(ex.len(), 3);
        assert!(ex.iter().all(|e| !e.positive && e.labels.iter().all(|&b| b == Bio::O)));
        assert_eq!(ct_make_examples(&utt(), &schema(&["Dest"])).len(), 1);
    }
}
