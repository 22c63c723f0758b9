//! Path-context mining: tree paths between terminals, MD5-hashed path
//! strings, capped bags per function, vocabularies and the C2V line format.

pub mod bag;
pub mod c2v;
pub mod paths;
pub mod vocab;

pub use bag::{extract_bag, sample_seed, BagOfContexts, ExtractError, PathContext, STRING_PLACEHOLDER};
pub use c2v::{read_c2v, write_c2v, C2vError};
pub use paths::{enumerate_paths, hash_path, path_string, AstPath, Direction, FlatTree, MiningLimits};
pub use vocab::{SymbolTable, VocabError, Vocabulary, PAD, UNK};

use crate::corpus::Label;

/// Header line shared by the C2V and vocabulary files.
pub const FORMAT_HEADER: &str = "#c2v-format 1";

/// Bag in id form: `[start value, path, end value]` per context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBag {
    pub label: Label,
    pub contexts: Vec<[u32; 3]>,
}

/// Maps symbols to ids; anything outside the vocabulary becomes `UNK`.
pub fn encode_bag(bag: &BagOfContexts, vocab: &Vocabulary) -> EncodedBag {
    EncodedBag {
        label: bag.label,
        contexts: bag
            .contexts
            .iter()
            .map(|c| [vocab.values.id(&c.start_value), vocab.paths.id(&c.path_hash), vocab.values.id(&c.end_value)])
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(s: &str, p: &str, t: &str) -> PathContext {
        PathContext { start_value: s.into(), path_hash: p.into(), end_value: t.into() }
    }

    #[test]
    fn known_symbols_get_real_ids() {
        let bag = BagOfContexts { sample_id: 0, label: Label::Vuln, contexts: vec![ctx("x", "h", "7")] };
        let vocab = Vocabulary::build(std::slice::from_ref(&bag), 1);
        let enc = encode_bag(&bag, &vocab);
        assert_eq!(enc.label, Label::Vuln);
        assert_eq!(enc.contexts.len(), 1);
        assert!(enc.contexts[0].iter().all(|&id| id >= 2));
    }

    #[test]
    fn unseen_symbols_map_to_unk() {
        let train = BagOfContexts { sample_id: 0, label: Label::Safe, contexts: vec![ctx("x", "h", "7")] };
        let vocab = Vocabulary::build(&[train], 1);
        let test =
            BagOfContexts { sample_id: 1, label: Label::Safe, contexts: vec![ctx("x", "h", "zz"), ctx("q", "g", "7")] };
        let enc = encode_bag(&test, &vocab);
        assert_eq!(enc.contexts[0][2], UNK);
        assert_eq!(enc.contexts[1][0], UNK);
        assert_eq!(enc.contexts[1][1], UNK);
        assert_ne!(enc.contexts[1][2], UNK);
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(ctxs in proptest::collection::vec(("[a-d]{1,2}", "[p-s]", "[a-d]{1,2}"), 1..30)) {
            let bag = BagOfContexts {
                sample_id: 0,
                label: Label::Safe,
                contexts: ctxs.iter().map(|(s, p, t)| ctx(s, p, t)).collect(),
            };
            let vocab = Vocabulary::build(std::slice::from_ref(&bag), 1);
            let enc = encode_bag(&bag, &vocab);
            prop_assert_eq!(enc.contexts.len(), bag.contexts.len());
            for (ids, c) in enc.contexts.iter().zip(&bag.contexts) {
                prop_assert!(ids.iter().all(|&id| id >= 2));
                prop_assert_eq!(vocab.values.name(ids[0]).unwrap(), c.start_value.as_str());
                prop_assert_eq!(vocab.paths.name(ids[1]).unwrap(), c.path_hash.as_str());
                prop_assert_eq!(vocab.values.name(ids[2]).unwrap(), c.end_value.as_str());
            }
        }
    }
}
