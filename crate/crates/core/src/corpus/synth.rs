//! Synthetic corpus with planted label keywords.
//!
//! Each label owns a small disjoint keyword set. A post samples every label
//! independently with probability equal to the label's prior; the problem
//! text drops an adjacent pair of distinct keywords per sampled label into a
//! random filler sentence and the negative take repeats one keyword per
//! sampled label.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Post};
use crate::ontology::{LabelCatalog, LabelSet};

const KEYWORDS: [(&str, [&str; 4]); 31] = [
    ("black_and_white", ["perfect", "failure", "ruined", "totally"]),
    ("blaming", ["blame", "fault", "responsible", "caused"]),
    ("catastrophising", ["disaster", "catastrophe", "doomed", "terrible"]),
    ("comparing", ["comparison", "better", "prettier", "smarter"]),
    ("disqualifying_the_positive", ["luck", "fluke", "undeserved", "whatever"]),
    ("emotional_reasoning", ["feel", "feels", "sense", "gut"]),
    ("fortune_telling", ["will", "gonna", "future", "predict"]),
    ("jumping_to_negative_conclusions", ["probably", "surely", "obviously", "assume"]),
    ("labelling", ["idiot", "loser", "stupid", "worthless"]),
    ("low_frustration_tolerance", ["intolerable", "unbearable", "unendurable", "insufferable"]),
    ("inflexibility", ["should", "must", "ought", "need"]),
    ("mental_filtering", ["only", "negative", "bad", "wrong"]),
    ("mind_reading", ["judging", "hates", "despise", "mocking"]),
    ("over_generalising", ["always", "never", "nobody", "everything"]),
    ("personalising", ["me", "mine", "myself", "personally"]),
    ("anger", ["angry", "furious", "annoyed", "irritated"]),
    ("anxiety", ["anxious", "worried", "nervous", "scared"]),
    ("depression", ["depressed", "hopeless", "empty", "numb"]),
    ("grief", ["sad", "grieving", "mourning", "crying"]),
    ("guilt", ["guilty", "sorry", "regret", "apologise"]),
    ("hurt", ["hurt", "betrayed", "wounded", "mistreated"]),
    ("jealousy", ["jealous", "envious", "envy", "resent"]),
    ("loneliness", ["lonely", "alone", "isolated", "friendless"]),
    ("shame", ["ashamed", "humiliated", "embarrassed", "disgraced"]),
    ("bereavement", ["died", "funeral", "passed", "death"]),
    ("existential", ["meaning", "purpose", "identity", "existence"]),
    ("health", ["sick", "doctor", "illness", "hospital"]),
    ("relationships", ["boyfriend", "girlfriend", "friend", "family"]),
    ("school_college", ["school", "exam", "teacher", "college"]),
    ("work", ["boss", "job", "office", "coworker"]),
    ("other", ["neighbour", "car", "moving", "money"]),
];

pub const FILLER_WORDS: &[&str] = &[
    "i", "the", "a", "and", "to", "it", "was", "today", "yesterday", "picnic", "weather", "bus",
    "coffee", "garden", "window", "morning", "evening", "went", "saw", "said", "just", "really",
    "so", "very", "this", "that", "with", "at", "on", "in", "of", "about", "had", "have", "there",
    "some", "again", "week", "weekend", "phone", "message", "dinner", "walk", "park", "house",
    "room", "book", "music", "movie", "night", "sleep", "breakfast", "lunch", "tea", "rain",
    "sun", "train", "street", "shop", "game", "song", "chair", "table", "door", "dog", "cat",
    "bird", "tree", "river", "city", "town", "road", "bag", "shoes", "jacket", "paper", "pen",
    "laptop", "kitchen", "bread", "apple", "water", "minute", "hour", "day", "month", "year",
    "thing", "place", "maybe", "then", "later", "after", "around", "still",
];

/// Keywords planted for `label`, if it is one of the built-in labels.
pub fn keywords_for(label: &str) -> Option<&'static [&'static str; 4]> {
    KEYWORDS.iter().find(|(l, _)| *l == label).map(|(_, k)| k)
}

fn sentence(words: &[&str], terminator: char) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get(..1) {
        let upper = first.to_uppercase();
        s.replace_range(..1, &upper);
    }
    s.push(terminator);
    s
}

fn fillers(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<&'static str> {
    let n = rng.random_range(lo..=hi);
    (0..n)
        .map(|_| *FILLER_WORDS.choose(rng).expect("non-empty filler list"))
        .collect()
}

/// Generates `n_posts` labelled posts. Labels missing from the built-in
/// keyword table are never sampled.
pub fn synth_generate(catalog: &LabelCatalog, n_posts: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<(&str, f64, &[&str; 4])> = catalog
        .labels()
        .iter()
        .filter_map(|l| keywords_for(&l.id).map(|k| (l.id.as_str(), l.prior, k)))
        .collect();
    let width = n_posts.max(1).to_string().len();

    let mut dataset = Dataset::default();
    for i in 0..n_posts {
        let labels: Vec<(&str, &[&str; 4])> = planted
            .iter()
            .filter_map(|&(id, prior, kw)| rng.random_bool(prior).then_some((id, kw)))
            .collect();

        let n_sentences = rng.random_range(1..=4);
        let mut problem: Vec<Vec<&str>> = (0..n_sentences).map(|_| fillers(&mut rng, 2, 4)).collect();
        for (_, kw) in &labels {
            let pair: Vec<&str> = kw.choose_multiple(&mut rng, 2).copied().collect();
            let s = rng.random_range(0..n_sentences);
            let pos = rng.random_range(0..=problem[s].len());
            problem[s].splice(pos..pos, pair);
        }
        let mut take: Vec<&str> = labels
            .iter()
            .map(|(_, kw)| *kw.choose(&mut rng).expect("four keywords"))
            .collect();
        take.extend(fillers(&mut rng, 2, 4));
        take.shuffle(&mut rng);

        let problem_text = problem
            .iter()
            .map(|words| sentence(words, if rng.random_bool(0.15) { '!' } else { '.' }))
            .collect::<Vec<_>>()
            .join(" ");
        let id = format!("synth-{i:0width$}");
        dataset.posts.push(Post {
            id: id.clone(),
            problem: problem_text,
            negative_take: sentence(&take, '.'),
        });
        dataset
            .gold
            .insert(id, labels.iter().map(|(l, _)| *l).collect::<LabelSet>());
    }
    dataset
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::tokenize;
    use std::collections::HashSet;

    #[test]
    fn keyword_sets_are_disjoint_from_each_other_and_fillers() {
        let mut seen = HashSet::new();
        for (_, kws) in KEYWORDS {
            for k in kws {
                assert!(seen.insert(k), "keyword `{k}` reused");
            }
        }
        for f in FILLER_WORDS {
            assert!(!seen.contains(f), "filler `{f}` is also a keyword");
        }
        let catalog = LabelCatalog::load();
        assert!(catalog.ids().all(|id| keywords_for(id).is_some()));
    }

    #[test]
    fn deterministic_per_seed() {
        let c = LabelCatalog::load();
        let a = synth_generate(&c, 1000, 7);
        let b = synth_generate(&c, 1000, 7);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_jsonl(&mut x).unwrap();
        b.write_jsonl(&mut y).unwrap();
        assert_eq!(x, y);
        assert_ne!(a, synth_generate(&c, 1000, 8));
    }

    #[test]
    fn labelled_posts_contain_a_keyword() {
        let c = LabelCatalog::load();
        let d = synth_generate(&c, 500, 1);
        for p in &d.posts {
            let take: HashSet<String> = tokenize(&p.negative_take).into_iter().collect();
            let problem: HashSet<String> = tokenize(&p.problem).into_iter().collect();
            let n = problem.len();
            assert!((2..=4 * 10).contains(&n));
            for label in d.gold[&p.id].iter() {
                let kw = keywords_for(label).unwrap();
                assert!(kw.iter().any(|k| take.contains(*k)));
                assert!(kw.iter().any(|k| problem.contains(*k)));
            }
            assert_eq!(crate::textprep::split_sentences(&p.negative_take).len(), 1);
            let ns = crate::textprep::split_sentences(&p.problem).len();
            assert!((1..=4).contains(&ns), "{ns} sentences");
        }
    }

    #[test]
    fn frequencies_converge_to_priors() {
        let c = LabelCatalog::load();
        let d = synth_generate(&c, 50_000, 11);
        let n = d.gold.values().filter(|s| s.contains("anxiety")).count();
        let freq = n as f64 / 50_000.0;
        assert!((freq - 0.6312).abs() < 0.02, "{freq}");
    }
}
