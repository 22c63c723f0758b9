//! Generated two-class corpus of small C functions. A function is `vuln`
//! exactly when it calls [`DESIGNATED_CALL`]; safe functions make a call to
//! some other helper at the same position, so nothing else separates the
//! classes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusError, FunctionSample, Label, SplitCorpus};

pub const DESIGNATED_CALL: &str = "unchecked_copy";

const HELPERS: &[&str] =
    &["checked_copy", "log_event", "read_header", "update_stats", "release_buffer", "validate_len"];
const TYPES: &[&str] = &["int", "long", "unsigned", "size_t"];
const PARAMS: &[&str] = &["buf", "len", "ctx", "src", "flags", "pos"];
const LOCALS: &[&str] = &["n", "ret", "count", "off"];

fn statement(rng: &mut ChaCha8Rng, vars: &[&str]) -> String {
    let a = vars.choose(rng).unwrap();
    let b = vars.choose(rng).unwrap();
    let k: u32 = rng.gen_range(0..64);
    match rng.gen_range(0..5) {
        0 => format!("{a} = {b} + {k};"),
        1 => format!("if ({a} > {k}) {{ {b} = {a} - 1; }}"),
        2 => format!("while ({a} < {k}) {{ {a}++; }}"),
        3 => format!("{a} = {b} * {k};"),
        _ => format!("{}({a}, {b});", HELPERS.choose(rng).unwrap()),
    }
}

/// One function; `vuln` decides whether the marked call is the designated one.
pub fn synthetic_function(rng: &mut ChaCha8Rng, index: u64, vuln: bool) -> String {
    let params: Vec<&str> = PARAMS.choose_multiple(rng, 2).copied().collect();
    let local = *LOCALS.choose(rng).unwrap();
    let mut vars = params.clone();
    vars.push(local);

    let mut body: Vec<String> = (0..rng.gen_range(1..=3)).map(|_| statement(rng, &vars)).collect();
    let callee = if vuln { DESIGNATED_CALL } else { HELPERS.choose(rng).unwrap() };
    let at = rng.gen_range(0..=body.len());
    body.insert(at, format!("{callee}({}, {});", vars.choose(rng).unwrap(), vars.choose(rng).unwrap()));

    let ret = TYPES.choose(rng).unwrap();
    format!(
        "{ret} fn_{index}({} {}, {} {}) {{\n    {ret} {local} = {};\n    {}\n    return {local};\n}}\n",
        TYPES.choose(rng).unwrap(),
        params[0],
        TYPES.choose(rng).unwrap(),
        params[1],
        rng.gen_range(0..16),
        body.join("\n    "),
    )
}

/// `per_class` functions of each label, in a seeded shuffled order with ids
/// `0..2 * per_class`.
pub fn synthetic_corpus(per_class: usize, seed: u64) -> Vec<FunctionSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Label> =
        (0..2 * per_class).map(|i| if i < per_class { Label::Vuln } else { Label::Safe }).collect();
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| FunctionSample {
            id: i as u64,
            source_text: synthetic_function(&mut rng, i as u64, label == Label::Vuln),
            label,
        })
        .collect()
}

/// The corpus split 80/10/10 into train, validation and test.
pub fn synthetic_splits(per_class: usize, seed: u64) -> Result<SplitCorpus, CorpusError> {
    let mut all = synthetic_corpus(per_class, seed);
    let n = all.len();
    let test = all.split_off(n - n / 10);
    let validation = all.split_off(all.len() - n / 10);
    SplitCorpus::new(all, validation, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cparse::parse_source;

    #[test]
    fn balanced_parseable_and_labelled_by_the_call() {
        let corpus = synthetic_corpus(100, 9);
        assert_eq!(corpus.iter().filter(|s| s.label == Label::Vuln).count(), 100);
        for s in &corpus {
            parse_source(&s.source_text).unwrap_or_else(|e| panic!("{e}\n{}", s.source_text));
            assert_eq!(s.source_text.contains(DESIGNATED_CALL), s.label == Label::Vuln);
        }
        assert_eq!(corpus, synthetic_corpus(100, 9));
    }

    #[test]
    fn split_sizes() {
        let s = synthetic_splits(1000, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (1600, 200, 200));
    }
}
