//! Annotation store: posts, per-annotator label sets and the journal that
//! makes them durable.
//!
//! A store directory holds three files. `posts.jsonl` is written once at
//! creation. `journal.jsonl` receives one line per label change and is
//! synced before the change is acknowledged. `snapshot.json` holds the state
//! up to some journal sequence number; opening a store loads the snapshot and
//! replays the journal entries that follow it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use cbtnlu_core::evaluation::{agreement_report, AgreementReport, KappaMode};
use cbtnlu_core::{Annotation, Dataset, LabelCatalog, LabelSet, Post};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const POSTS_FILE: &str = "posts.jsonl";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 200;

/// One acknowledged label change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub seq: u64,
    pub post_id: String,
    pub annotator: String,
    pub add: LabelSet,
    pub remove: LabelSet,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusFilter {
    #[default]
    All,
    Pending,
    Annotated,
}

impl FromStr for StatusFilter {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" | "all" => Ok(StatusFilter::All),
            "pending" => Ok(StatusFilter::Pending),
            "annotated" => Ok(StatusFilter::Annotated),
            other => Err(ServiceError::BadPage(format!("unknown status `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageQuery {
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    pub status: StatusFilter,
    pub annotator: Option<String>,
}

impl Default for PageQuery {
    fn default() -> Self {
        Self {
            page: 1,
            page_size: DEFAULT_PAGE_SIZE,
            status: StatusFilter::All,
            annotator: None,
        }
    }
}

impl PageQuery {
    pub fn validate(&self) -> Result<()> {
        if self.page == 0 {
            return Err(ServiceError::BadPage("page numbers start at 1".into()));
        }
        if !(1..=MAX_PAGE_SIZE).contains(&self.page_size) {
            return Err(ServiceError::BadPage(format!(
                "page_size must be between 1 and {MAX_PAGE_SIZE}, got {}",
                self.page_size
            )));
        }
        if self.status != StatusFilter::All && self.annotator.is_none() {
            return Err(ServiceError::BadPage("status filters need an annotator".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostSummary {
    pub id: String,
    pub problem: String,
    pub negative_take: String,
    /// The requesting annotator's labels, if they have reviewed the post.
    pub labels: Option<LabelSet>,
    /// With an annotator: they have not reviewed the post. Without one:
    /// nobody has.
    pub pending: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub page: usize,
    pub page_size: usize,
    /// Posts matching the status filter.
    pub total: usize,
    pub total_posts: usize,
    /// Pending posts for the requesting annotator.
    pub pending: Option<usize>,
    pub items: Vec<PostSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostDetail {
    pub id: String,
    pub problem: String,
    pub negative_take: String,
    pub annotations: BTreeMap<String, LabelSet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MergePolicy {
    /// Labels of every annotator are merged.
    Union,
    /// Only this annotator's labels count.
    Primary(String),
}

pub struct AnnotationStore {
    dir: Option<PathBuf>,
    catalog: LabelCatalog,
    posts: Vec<Post>,
    index: HashMap<String, usize>,
    /// post id → annotator → annotation.
    annotations: BTreeMap<String, BTreeMap<String, Annotation>>,
    journal: Option<File>,
    seq: u64,
    since_snapshot: usize,
    snapshot_every: usize,
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn index_posts(posts: &[Post]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(posts.len());
    for (i, p) in posts.iter().enumerate() {
        if index.insert(p.id.clone(), i).is_some() {
            return Err(cbtnlu_core::Error::DuplicateId(p.id.clone()).into());
        }
    }
    Ok(index)
}

impl AnnotationStore {
    /// A store without files; changes are lost when it is dropped.
    pub fn in_memory(posts: Vec<Post>, catalog: LabelCatalog) -> Result<Self> {
        let index = index_posts(&posts)?;
        Ok(Self {
            dir: None,
            catalog,
            posts,
            index,
            annotations: BTreeMap::new(),
            journal: None,
            seq: 0,
            since_snapshot: 0,
            snapshot_every: 1000,
        })
    }

    /// Initialises `dir` with `posts` and opens it. Fails if the directory
    /// already holds a store.
    pub fn create(dir: impl AsRef<Path>, posts: Vec<Post>, catalog: LabelCatalog) -> Result<Self> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let path = dir.join(POSTS_FILE);
        if path.exists() {
            return Err(ServiceError::BadRequest(format!("{} already exists", path.display())));
        }
        index_posts(&posts)?;
        let dataset = Dataset { posts, gold: BTreeMap::new() };
        dataset.export(&path)?;
        Self::open(dir, catalog)
    }

    /// Loads the posts and snapshot of `dir` and replays its journal. A torn
    /// final journal line, left by a crash mid-write, was never acknowledged
    /// and is cut off.
    pub fn open(dir: impl AsRef<Path>, catalog: LabelCatalog) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let dataset = Dataset::ingest(dir.join(POSTS_FILE), &catalog)?;
        let mut store = Self::in_memory(dataset.posts, catalog)?;

        let snapshot_path = dir.join(SNAPSHOT_FILE);
        if snapshot_path.exists() {
            let snapshot: Snapshot = serde_json::from_str(&fs::read_to_string(&snapshot_path)?)?;
            for a in snapshot.annotations {
                store
                    .annotations
                    .entry(a.post_id.clone())
                    .or_default()
                    .insert(a.annotator_id.clone(), a);
            }
            store.seq = snapshot.seq;
        }

        let journal_path = dir.join(JOURNAL_FILE);
        if journal_path.exists() {
            let valid_len = store.replay(&journal_path)?;
            let file = OpenOptions::new().write(true).open(&journal_path)?;
            if file.metadata()?.len() != valid_len {
                log::warn!("dropping torn journal tail after byte {valid_len}");
                file.set_len(valid_len)?;
                file.sync_all()?;
            }
        }
        store.journal = Some(OpenOptions::new().create(true).append(true).open(&journal_path)?);
        store.dir = Some(dir);
        Ok(store)
    }

    /// Applies journal events newer than the loaded state and returns the
    /// byte length of the well-formed prefix.
    fn replay(&mut self, path: &Path) -> Result<u64> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut valid = 0u64;
        let mut line = String::new();
        let mut number = 0;
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            number += 1;
            if !line.ends_with('\n') {
                break;
            }
            let event: LabelEvent = serde_json::from_str(line.trim_end()).map_err(|e| {
                ServiceError::CorruptJournal { line: number, message: e.to_string() }
            })?;
            valid += n as u64;
            if event.seq <= self.seq {
                continue;
            }
            if event.seq != self.seq + 1 {
                return Err(ServiceError::CorruptJournal {
                    line: number,
                    message: format!("sequence jumps from {} to {}", self.seq, event.seq),
                });
            }
            if !self.index.contains_key(&event.post_id) {
                return Err(ServiceError::CorruptJournal {
                    line: number,
                    message: format!("unknown post `{}`", event.post_id),
                });
            }
            self.apply(&event);
        }
        Ok(valid)
    }

    fn apply(&mut self, event: &LabelEvent) -> Annotation {
        let previous = self
            .annotations
            .get(&event.post_id)
            .and_then(|m| m.get(&event.annotator))
            .map(|a| a.labels.clone())
            .unwrap_or_default();
        let labels = previous.union(&event.add).difference(&event.remove);
        let annotation = Annotation {
            post_id: event.post_id.clone(),
            annotator_id: event.annotator.clone(),
            labels,
            timestamp: event.timestamp,
        };
        self.annotations
            .entry(event.post_id.clone())
            .or_default()
            .insert(event.annotator.clone(), annotation.clone());
        self.seq = event.seq;
        annotation
    }

    /// Adds and removes labels for one annotator on one post. The change is
    /// journaled and synced before it is applied. With both sets empty the
    /// post is marked reviewed with its current labels.
    pub fn put_labels(&mut self, post_id: &str, annotator: &str, add: &LabelSet, remove: &LabelSet) -> Result<Annotation> {
        if annotator.trim().is_empty() {
            return Err(ServiceError::BadRequest("annotator id is empty".into()));
        }
        if !self.index.contains_key(post_id) {
            return Err(ServiceError::UnknownPost(post_id.to_string()));
        }
        if let Some(unknown) = add.iter().chain(remove.iter()).find(|l| !self.catalog.contains(l)) {
            return Err(ServiceError::UnknownLabel(unknown.to_string()));
        }
        let overlap = add.intersection(remove);
        if !overlap.is_empty() {
            return Err(ServiceError::ConflictingRequest(overlap.iter().map(str::to_string).collect()));
        }

        let event = LabelEvent {
            seq: self.seq + 1,
            post_id: post_id.to_string(),
            annotator: annotator.to_string(),
            add: add.clone(),
            remove: remove.clone(),
            timestamp: now_millis(),
        };
        if let Some(journal) = &mut self.journal {
            let mut line = serde_json::to_string(&event)?;
            line.push('\n');
            journal.write_all(line.as_bytes())?;
            journal.sync_data()?;
        }
        let annotation = self.apply(&event);
        self.since_snapshot += 1;
        if self.dir.is_some() && self.since_snapshot >= self.snapshot_every {
            self.snapshot()?;
        }
        Ok(annotation)
    }

    /// Writes the current state to the snapshot file atomically. In-memory
    /// stores ignore this.
    pub fn snapshot(&mut self) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let snapshot = Snapshot {
            seq: self.seq,
            annotations: self.annotations().cloned().collect(),
        };
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let mut file = File::create(&tmp)?;
        file.write_all(serde_json::to_string(&snapshot)?.as_bytes())?;
        file.sync_all()?;
        fs::rename(&tmp, dir.join(SNAPSHOT_FILE))?;
        self.since_snapshot = 0;
        Ok(())
    }

    /// Snapshot after this many journaled changes.
    pub fn set_snapshot_interval(&mut self, every: usize) {
        self.snapshot_every = every.max(1);
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn catalog(&self) -> &LabelCatalog {
        &self.catalog
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    /// Sequence number of the last applied change.
    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// All annotations ordered by post id, then annotator.
    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.annotations.values().flat_map(BTreeMap::values)
    }

    pub fn annotation(&self, post_id: &str, annotator: &str) -> Option<&Annotation> {
        self.annotations.get(post_id)?.get(annotator)
    }

    pub fn annotators(&self) -> BTreeSet<String> {
        self.annotations().map(|a| a.annotator_id.clone()).collect()
    }

    /// Label sets of every post `annotator` has reviewed.
    pub fn labels_by(&self, annotator: &str) -> BTreeMap<String, LabelSet> {
        self.annotations
            .iter()
            .filter_map(|(post, m)| m.get(annotator).map(|a| (post.clone(), a.labels.clone())))
            .collect()
    }

    pub fn annotated_count(&self, annotator: &str) -> usize {
        self.annotations.values().filter(|m| m.contains_key(annotator)).count()
    }

    pub fn pending_count(&self, annotator: &str) -> usize {
        self.posts.len() - self.annotated_count(annotator)
    }

    fn is_pending(&self, post_id: &str, annotator: Option<&str>) -> bool {
        match (self.annotations.get(post_id), annotator) {
            (None, _) => true,
            (Some(m), Some(a)) => !m.contains_key(a),
            (Some(m), None) => m.is_empty(),
        }
    }

    /// One page of posts in ingestion order. Pages past the end are empty.
    pub fn list_posts(&self, query: &PageQuery) -> Result<Page> {
        query.validate()?;
        let annotator = query.annotator.as_deref();
        let matching: Vec<&Post> = self
            .posts
            .iter()
            .filter(|p| match query.status {
                StatusFilter::All => true,
                StatusFilter::Pending => self.is_pending(&p.id, annotator),
                StatusFilter::Annotated => !self.is_pending(&p.id, annotator),
            })
            .collect();
        let start = (query.page - 1).saturating_mul(query.page_size);
        let items = matching
            .iter()
            .skip(start)
            .take(query.page_size)
            .map(|p| PostSummary {
                id: p.id.clone(),
                problem: p.problem.clone(),
                negative_take: p.negative_take.clone(),
                labels: annotator.and_then(|a| self.annotation(&p.id, a)).map(|a| a.labels.clone()),
                pending: self.is_pending(&p.id, annotator),
            })
            .collect();
        Ok(Page {
            page: query.page,
            page_size: query.page_size,
            total: matching.len(),
            total_posts: self.posts.len(),
            pending: annotator.map(|a| self.pending_count(a)),
            items,
        })
    }

    pub fn post_detail(&self, post_id: &str) -> Result<PostDetail> {
        let &i = self
            .index
            .get(post_id)
            .ok_or_else(|| ServiceError::UnknownPost(post_id.to_string()))?;
        let post = &self.posts[i];
        Ok(PostDetail {
            id: post.id.clone(),
            problem: post.problem.clone(),
            negative_take: post.negative_take.clone(),
            annotations: self
                .annotations
                .get(post_id)
                .map(|m| m.iter().map(|(k, a)| (k.clone(), a.labels.clone())).collect())
                .unwrap_or_default(),
        })
    }

    /// Per-category kappa over the posts both annotators reviewed.
    pub fn agreement(&self, a: &str, b: &str, mode: KappaMode) -> Result<AgreementReport> {
        Ok(agreement_report(&self.labels_by(a), &self.labels_by(b), &self.catalog, mode)?)
    }

    /// Every post with merged labels. Posts nobody (or not the primary
    /// annotator) reviewed stay unlabelled.
    pub fn export_gold(&self, policy: &MergePolicy) -> Dataset {
        let mut gold = BTreeMap::new();
        for post in &self.posts {
            let Some(m) = self.annotations.get(&post.id) else { continue };
            let merged = match policy {
                MergePolicy::Union if !m.is_empty() => {
                    Some(m.values().fold(LabelSet::new(), |acc, a| acc.union(&a.labels)))
                }
                MergePolicy::Union => None,
                MergePolicy::Primary(who) => m.get(who).map(|a| a.labels.clone()),
            };
            if let Some(labels) = merged {
                gold.insert(post.id.clone(), labels);
            }
        }
        Dataset { posts: self.posts.clone(), gold }
    }
}
