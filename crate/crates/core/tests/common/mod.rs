#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relseq::features::{ContentVector, FeatureIndex, FeatureKey, NUM_CONTENT};
use relseq::lexicons::{FrameLexicon, LexiconName, Lexicons, PolarityLexicon, StopwordList};
use relseq::Scalar;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn fixture_lexicons() -> Lexicons {
    let dir = fixture("features");
    let pol = |name: LexiconName| {
        PolarityLexicon::load(&dir.join(format!("lexicons/{name}.tsv")), name).unwrap()
    };
    Lexicons {
        connotation: pol(LexiconName::Connotation),
        sentiment: pol(LexiconName::Sentiment),
        prior_polarity: pol(LexiconName::PriorPolarity),
        frames: FrameLexicon::load(&dir.join("frames.tsv")).unwrap(),
        stopwords: StopwordList::load(&dir.join("stopwords.txt")).unwrap(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sparse random counts: each feature is non-zero with probability 0.15.
pub fn random_contents(rng: &mut ChaCha8Rng, len: usize) -> Vec<ContentVector> {
    (0..len)
        .map(|_| {
            let mut v = [0u32; NUM_CONTENT];
            for x in v.iter_mut() {
                if rng.gen_bool(0.15) {
                    *x = rng.gen_range(1..=3);
                }
            }
            ContentVector(v)
        })
        .collect()
}

/// Weights on a coarse dyadic grid, so float sums are exact and ties common.
pub fn dyadic_weights<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| T::from_i64(rng.gen_range(-4..=4)).unwrap() / T::from_i64(4).unwrap())
        .collect()
}

/// Feature counts of `(contents, states)` built from the template
/// definitions, keyed by template rather than id.
pub fn phi_oracle(contents: &[ContentVector], states: &[usize]) -> BTreeMap<FeatureKey, u32> {
    let mut phi: BTreeMap<FeatureKey, u32> = BTreeMap::new();
    for (i, (cv, &y)) in contents.iter().zip(states).enumerate() {
        for f in 1..=NUM_CONTENT {
            if cv.feature(f) > 0 {
                *phi.entry(FeatureKey::Content {
                    feature: f as u8,
                    state: y,
                })
                .or_default() += cv.feature(f);
            }
        }
        let key = match i {
            0 => FeatureKey::Init { state: y },
            1 => FeatureKey::Trans1 {
                cur: y,
                prev: states[0],
            },
            _ => FeatureKey::Trans2 {
                cur: y,
                prev: states[i - 1],
                prev2: states[i - 2],
            },
        };
        *phi.entry(key).or_default() += 1;
    }
    phi
}

pub fn score_oracle<T: Scalar>(
    contents: &[ContentVector],
    states: &[usize],
    w: &[T],
    index: &FeatureIndex,
) -> T {
    let mut s = T::zero();
    for (key, count) in phi_oracle(contents, states) {
        s += w[index.id(key).expect("key in index")] * T::from_count(count);
    }
    s
}

/// All state sequences of length `len`, in lexicographic
/// order of the given preference.
pub fn enumerate(len: usize, preference: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                preference.iter().map(move |&s| {
                    let mut p = prefix.clone();
                    p.push(s);
                    p
                })
            })
            .collect();
    }
    out
}

/// First sequence in preference-lexicographic order with maximal score
/// among those agreeing with `labels`.
pub fn brute_force_argmax<T: Scalar>(
    contents: &[ContentVector],
    labels: &[Option<usize>],
    w: &[T],
    index: &FeatureIndex,
    preference: &[usize],
) -> (Vec<usize>, T) {
    let mut best: Option<(Vec<usize>, T)> = None;
    for y in enumerate(contents.len(), preference) {
        if y.iter()
            .zip(labels)
            .any(|(s, l)| l.is_some_and(|l| l != *s))
        {
            continue;
        }
        let s = score_oracle(contents, &y, w, index);
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((y, s));
        }
    }
    best.expect("at least one consistent sequence")
}

/// Levenshtein distance straight from its recursive definition, memoised.
pub fn edit_distance_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(
        a: &[T],
        b: &[T],
        i: usize,
        j: usize,
        memo: &mut HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == 0 {
            return j;
        }
        if j == 0 {
            return i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let cost = usize::from(a[i - 1] != b[j - 1]);
        let v = (go(a, b, i - 1, j, memo) + 1)
            .min(go(a, b, i, j - 1, memo) + 1)
            .min(go(a, b, i - 1, j - 1, memo) + cost);
        memo.insert((i, j), v);
        v
    }
    go(a, b, a.len(), b.len(), &mut HashMap::new())
}

/// Builds boolean gold/prediction lists from binary confusion counts of the
/// positive class.
pub fn binary_from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> (Vec<bool>, Vec<bool>) {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for (g, p, n) in [
        (true, true, tp),
        (false, true, fp),
        (true, false, fn_),
        (false, false, tn),
    ] {
        gold.extend(std::iter::repeat_n(g, n));
        pred.extend(std::iter::repeat_n(p, n));
    }
    (gold, pred)
}
