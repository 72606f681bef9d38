//! The fixed CBT label taxonomy: thinking errors, emotions and situations.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ThinkingError,
    Emotion,
    Situation,
}

impl Category {
    pub const ALL: [Category; 3] = [
        Category::ThinkingError,
        Category::Emotion,
        Category::Situation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ThinkingError => "thinking_error",
            Category::Emotion => "emotion",
            Category::Situation => "situation",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "thinking_error" | "thinkingerror" | "te" => Ok(Category::ThinkingError),
            "emotion" => Ok(Category::Emotion),
            "situation" => Ok(Category::Situation),
            other => Err(Error::InvalidConfig(format!("unknown category `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub category: Category,
    pub id: String,
    pub display_name: String,
    pub description: String,
    /// Fraction of annotated posts carrying this label.
    pub prior: f64,
}

/// A set of label ids. Ordering is lexicographic so serialized forms are stable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSet(BTreeSet<String>);

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.contains(id)
    }

    pub fn insert(&mut self, id: impl Into<String>) -> bool {
        self.0.insert(id.into())
    }

    pub fn remove(&mut self, id: &str) -> bool {
        self.0.remove(id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn union(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.intersection(&other.0).cloned().collect())
    }
}

impl<S: Into<String>> FromIterator<S> for LabelSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        LabelSet(iter.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelCatalog {
    labels: Vec<Label>,
    index: HashMap<String, usize>,
}

// (id, display name, description, frequency in percent)
type Row = (&'static str, &'static str, &'static str, f64);

const THINKING_ERRORS: [Row; 15] = [
    ("black_and_white", "Black and white (all or nothing) thinking", "Sees situations only in absolute terms with no middle ground.", 20.82),
    ("blaming", "Blaming", "Puts responsibility for one's pain entirely on others.", 8.05),
    ("catastrophising", "Catastrophising", "Inflates a negative, often minor, event into a disaster.", 11.87),
    ("comparing", "Comparing", "Measures oneself unfavourably against other people.", 3.27),
    ("disqualifying_the_positive", "Disqualifying the positive", "Discounts the good parts of an experience.", 6.15),
    ("emotional_reasoning", "Emotional reasoning", "Treats a feeling as evidence of how things are.", 13.31),
    ("fortune_telling", "Fortune telling", "Predicts the future in an unduly negative way.", 25.70),
    ("jumping_to_negative_conclusions", "Jumping to negative conclusions", "Expects a bad outcome on little evidence.", 44.16),
    ("labelling", "Labelling", "Describes self or others with harsh, global labels.", 10.51),
    ("low_frustration_tolerance", "Low frustration tolerance", "Treats discomfort as unbearable rather than temporary.", 16.03),
    ("inflexibility", "Inflexibility", "Holds rigid should, must and ought rules.", 8.08),
    ("mental_filtering", "Mental filtering", "Attends only to the negative details.", 5.50),
    ("mind_reading", "Mind-reading", "Assumes others think badly of one or mean harm.", 14.60),
    ("over_generalising", "Over-generalising", "Draws sweeping negative rules from single events.", 12.69),
    ("personalising", "Personalising", "Takes events as being about oneself, ignoring other causes.", 5.85),
];

const EMOTIONS: [Row; 9] = [
    ("anger", "Anger (frustration)", "Annoyance, irritation, resentment or rage.", 14.76),
    ("anxiety", "Anxiety", "Fear, worry or nervousness.", 63.12),
    ("depression", "Depression", "Low mood, hopelessness, lack of joy.", 20.72),
    ("grief", "Grief/sadness", "Sadness tied to a significant loss.", 5.70),
    ("guilt", "Guilt", "Feeling at fault for something done or left undone.", 3.37),
    ("hurt", "Hurt", "Feeling wounded or treated badly by others.", 19.88),
    ("jealousy", "Jealousy", "Resentment of what another person has or is.", 3.12),
    ("loneliness", "Loneliness", "Isolation and feeling that nobody understands.", 7.41),
    ("shame", "Shame", "Humiliation about one's own behaviour or feelings.", 5.68),
];

const SITUATIONS: [Row; 7] = [
    ("bereavement", "Bereavement", "Death of someone close.", 2.65),
    ("existential", "Existential", "Meaning, identity and direction in life.", 21.93),
    ("health", "Health", "Physical or mental health concerns.", 10.61),
    ("relationships", "Relationships", "Family, friends and partners.", 67.58),
    ("school_college", "School/College", "Study, exams and school life.", 8.28),
    ("work", "Work", "Jobs, colleagues and careers.", 6.10),
    ("other", "Other", "Any situation outside the listed ones.", 5.53),
];

impl LabelCatalog {
    /// The built-in 31-label catalog.
    pub fn load() -> Self {
        let tables: [(Category, &[Row]); 3] = [
            (Category::ThinkingError, &THINKING_ERRORS),
            (Category::Emotion, &EMOTIONS),
            (Category::Situation, &SITUATIONS),
        ];
        let labels = tables
            .iter()
            .flat_map(|(category, rows)| {
                rows.iter().map(move |(id, name, desc, pct)| Label {
                    category: *category,
                    id: (*id).to_string(),
                    display_name: (*name).to_string(),
                    description: (*desc).to_string(),
                    prior: pct / 100.0,
                })
            })
            .collect();
        Self::from_labels(labels).expect("built-in catalog has unique ids")
    }

    /// Builds a catalog, rejecting duplicate ids. Labels are reordered by
    /// category while keeping their relative order within a category.
    pub fn from_labels(mut labels: Vec<Label>) -> Result<Self> {
        labels.sort_by_key(|l| l.category);
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if !(0.0..=1.0).contains(&label.prior) {
                return Err(Error::InvalidConfig(format!(
                    "prior of `{}` is outside [0, 1]",
                    label.id
                )));
            }
            if index.insert(label.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(label.id.clone()));
            }
        }
        Ok(Self { labels, index })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Label> {
        self.index.get(id).map(|&i| &self.labels[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn prior(&self, id: &str) -> Option<f64> {
        self.get(id).map(|l| l.prior)
    }

    pub fn labels_of(&self, category: Category) -> Vec<&Label> {
        self.labels.iter().filter(|l| l.category == category).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| l.id.as_str())
    }

    /// Checks every member against the catalog, returning one
    /// `UnknownLabel` per offending id.
    pub fn validate(&self, set: &LabelSet) -> std::result::Result<(), Vec<Error>> {
        let errors: Vec<Error> = set
            .iter()
            .filter(|id| !self.contains(id))
            .map(|id| Error::UnknownLabel(id.to_string()))
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Like [`validate`](Self::validate) but stops at the first unknown id.
    pub fn check(&self, set: &LabelSet) -> Result<()> {
        match set.iter().find(|id| !self.contains(id)) {
            Some(id) => Err(Error::UnknownLabel(id.to_string())),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.labels)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let labels: Vec<Label> = serde_json::from_str(text)?;
        Self::from_labels(labels)
    }
}

impl Default for LabelCatalog {
    fn default() -> Self {
        Self::load()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_sizes() {
        let c = LabelCatalog::load();
        assert_eq!(c.len(), 31);
        assert_eq!(c.labels_of(Category::ThinkingError).len(), 15);
        assert_eq!(c.labels_of(Category::Emotion).len(), 9);
        assert_eq!(c.labels_of(Category::Situation).len(), 7);
    }

    #[test]
    fn priors_match_tables() {
        let c = LabelCatalog::load();
        assert_eq!(c.prior("jumping_to_negative_conclusions"), Some(0.4416));
        assert_eq!(c.prior("relationships"), Some(0.6758));
        let emotion_sum: f64 = c.labels_of(Category::Emotion).iter().map(|l| l.prior).sum();
        assert!((emotion_sum - 1.4376).abs() < 1e-4);
    }

    #[test]
    fn labels_of_keeps_table_order() {
        let c = LabelCatalog::load();
        assert_eq!(c.labels_of(Category::Emotion)[0].id, "anger");
        assert_eq!(
            c.labels_of(Category::ThinkingError).last().unwrap().id,
            "personalising"
        );
        let order: Vec<Category> = c.labels().iter().map(|l| l.category).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
    }

    #[test]
    fn validate_reports_unknown_ids() {
        let c = LabelCatalog::load();
        assert!(c.validate(&["anxiety", "work"].into_iter().collect()).is_ok());
        assert!(c.validate(&LabelSet::new()).is_ok());
        let errs = c
            .validate(&["happiness", "anxiety", "joy"].into_iter().collect())
            .unwrap_err();
        let names: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        assert_eq!(errs.len(), 2);
        assert!(names[0].contains("happiness"));
        assert!(matches!(&errs[1], Error::UnknownLabel(id) if id == "joy"));
    }

    #[test]
    fn load_is_pure_and_json_round_trips() {
        let a = LabelCatalog::load();
        assert_eq!(a, LabelCatalog::load());
        let back = LabelCatalog::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut labels = LabelCatalog::load().labels().to_vec();
        labels.push(labels[0].clone());
        assert!(matches!(
            LabelCatalog::from_labels(labels),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn label_set_dedups() {
        let s: LabelSet = ["anxiety", "anxiety"].into_iter().collect();
        assert_eq!(s.len(), 1);
    }
}
