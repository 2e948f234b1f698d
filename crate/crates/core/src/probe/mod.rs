//! Prompt rendering, model backends and tensor collection.

mod http;
pub mod mock;
mod tensor;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

pub use self::http::{completion_prompt, HttpBackend, HttpOptions, OpenAiCompletionBackend, TOKEN_ENV};
pub use self::tensor::{ProbabilityTensor, TensorCell, TensorMeta};

use crate::error::{Error, Result};
use crate::hash::canonical_hash;
use crate::miner::{ContextSet, SlotOrder, X_SLOT, Y_SLOT};
use crate::reference::{self, BaselineSpec, BaselineTensor};
use crate::schema::WordSchema;

/// How the backend should score the `[Y]` position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotConvention {
    /// Fill-in-the-blank scoring for bidirectional models.
    Masked,
    /// Next-token scoring; `[Y]` is the last position of the prompt.
    Terminal,
}

impl SlotConvention {
    pub fn for_order(order: SlotOrder) -> Self {
        match order {
            SlotOrder::XThenY => SlotConvention::Masked,
            SlotOrder::YAtEnd => SlotConvention::Terminal,
        }
    }
}

impl std::str::FromStr for SlotConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "masked" => Ok(SlotConvention::Masked),
            "terminal" => Ok(SlotConvention::Terminal),
            _ => Err(Error::BadTemplate(format!("unknown slot convention `{s}`"))),
        }
    }
}

/// Fills `[X]` with the group word. In [`SlotOrder::YAtEnd`] mode anything
/// after `[Y]` is dropped so the slot is the final position.
pub fn render_prompt(skeleton: &str, group_word: &str, mode: SlotOrder) -> Result<String> {
    let word = group_word.trim().to_lowercase();
    if word.is_empty() {
        return Err(Error::BadTemplate(format!("{skeleton} (empty group word)")));
    }
    if skeleton.matches(X_SLOT).count() != 1 || skeleton.matches(Y_SLOT).count() != 1 {
        return Err(Error::BadTemplate(skeleton.to_string()));
    }
    let filled = skeleton.replacen(X_SLOT, &word, 1);
    Ok(match mode {
        SlotOrder::XThenY => filled,
        SlotOrder::YAtEnd => {
            let end = filled.find(Y_SLOT).expect("checked above") + Y_SLOT.len();
            filled[..end].to_string()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRequest {
    pub context_index: usize,
    pub context_id: String,
    pub group_index: usize,
    pub group_id: String,
    pub group_word: String,
    pub prompt: String,
    pub slot: SlotConvention,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProbability {
    pub word: String,
    pub prob: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryOutcome {
    /// One entry per candidate, in request order.
    pub probs: Vec<TokenProbability>,
    pub warnings: Vec<String>,
}

impl QueryOutcome {
    /// Builds an outcome from whatever the backend returned, reporting
    /// missing candidates as zero with a warning.
    pub fn from_lookup(req: &ProbeRequest, mut lookup: impl FnMut(&str) -> Option<f64>) -> Self {
        let mut out = QueryOutcome::default();
        for w in &req.candidates {
            let prob = match lookup(w) {
                Some(p) => p,
                None => {
                    out.warnings.push(format!(
                        "cell (`{}`, `{}`): no probability for `{w}`, using 0",
                        req.context_id, req.group_id
                    ));
                    0.0
                }
            };
            out.probs.push(TokenProbability { word: w.clone(), prob });
        }
        out
    }
}

pub trait Backend: Sync {
    /// Short descriptor recorded in tensor metadata.
    fn describe(&self) -> String;

    fn query(&self, req: &ProbeRequest) -> Result<QueryOutcome>;
}

/// Serves cells from a previously written tensor file.
pub struct FileBackend {
    source: String,
    cells: HashMap<(String, String), BTreeMap<String, f64>>,
}

impl FileBackend {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(Self::from_tensor(
            ProbabilityTensor::load(path)?,
            format!("file:{}", path.display()),
        ))
    }

    pub fn from_tensor(tensor: ProbabilityTensor, source: String) -> Self {
        let cells = tensor
            .cells
            .into_iter()
            .map(|c| ((c.context_id, c.group_id), c.probs))
            .collect();
        Self { source, cells }
    }
}

impl Backend for FileBackend {
    fn describe(&self) -> String {
        self.source.clone()
    }

    fn query(&self, req: &ProbeRequest) -> Result<QueryOutcome> {
        let cell = self
            .cells
            .get(&(req.context_id.clone(), req.group_id.clone()))
            .ok_or_else(|| Error::IncompleteTensor(format!("{} has no such cell", self.source)))?;
        Ok(QueryOutcome::from_lookup(req, |w| cell.get(w).copied()))
    }
}

/// Answers with a reference model's predictions: each category's mass is
/// placed on that category's first word.
pub struct BaselineBackend {
    spec: BaselineSpec,
    tensor: BaselineTensor,
    first_words: Vec<String>,
}

impl BaselineBackend {
    pub fn new(spec: BaselineSpec, schema: &WordSchema) -> Result<Self> {
        if spec.num_categories != schema.categories.len() || spec.num_groups != schema.groups.len() {
            return Err(Error::InvalidSpec(format!(
                "baseline is {}x{} but schema has {} groups and {} categories",
                spec.num_groups,
                spec.num_categories,
                schema.groups.len(),
                schema.categories.len()
            )));
        }
        let tensor = reference::generate(&spec)?;
        let first_words = schema.categories.iter().map(|c| c.words[0].clone()).collect();
        Ok(Self {
            spec,
            tensor,
            first_words,
        })
    }
}

impl Backend for BaselineBackend {
    fn describe(&self) -> String {
        format!("baseline:{}:seed={}", self.spec.kind.name(), self.spec.seed)
    }

    fn query(&self, req: &ProbeRequest) -> Result<QueryOutcome> {
        if req.context_index >= self.tensor.num_contexts() || req.group_index >= self.tensor.num_groups() {
            return Err(Error::IndexOutOfRange {
                index: req.context_index,
                len: self.tensor.num_contexts(),
            });
        }
        let dist = self.tensor.cell(req.context_index, req.group_index);
        let mut mass: HashMap<&str, f64> = HashMap::new();
        for (w, p) in self.first_words.iter().zip(dist.probs()) {
            mass.insert(w, *p);
        }
        Ok(QueryOutcome::from_lookup(req, |w| {
            Some(mass.get(w).copied().unwrap_or(0.0))
        }))
    }
}

/// Builds the per-cell requests in context-major order.
pub fn plan_requests(ctx: &ContextSet, schema: &WordSchema, slot: SlotConvention) -> Result<Vec<ProbeRequest>> {
    let candidates = schema.candidate_words();
    let mut out = Vec::with_capacity(ctx.len() * schema.groups.len());
    for (ci, t) in ctx.templates.iter().enumerate() {
        for (gi, g) in schema.groups.iter().enumerate() {
            out.push(ProbeRequest {
                context_index: ci,
                context_id: t.skeleton.clone(),
                group_index: gi,
                group_id: g.id.clone(),
                group_word: g.words[0].clone(),
                prompt: render_prompt(&t.skeleton, &g.words[0], ctx.mode)?,
                slot,
                candidates: candidates.clone(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CollectOptions {
    pub slot: SlotConvention,
    /// Upper bound on in-flight backend requests.
    pub concurrency: usize,
    /// Final tensor location. Partial progress is journaled next to it and
    /// picked up by the next run.
    pub cache_path: Option<PathBuf>,
}

impl CollectOptions {
    pub fn new(slot: SlotConvention) -> Self {
        Self {
            slot,
            concurrency: 8,
            cache_path: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollectOutcome {
    pub tensor: ProbabilityTensor,
    /// Number of backend requests issued by this run.
    pub queried: usize,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct JournalHeader {
    schema_hash: String,
    ctx_hash: String,
}

pub fn journal_path(tensor_path: &Path) -> PathBuf {
    let mut name = tensor_path.as_os_str().to_owned();
    name.push(".partial");
    PathBuf::from(name)
}

/// Loads cells from the journal if it belongs to the same inputs. A torn
/// final line from an interrupted write is ignored.
fn read_journal(path: &Path, header: &JournalHeader) -> Result<Vec<TensorCell>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut lines = std::io::BufReader::new(file).lines();
    let Some(first) = lines.next() else {
        return Ok(Vec::new());
    };
    let first = first.map_err(|e| Error::io(path, e))?;
    let existing: JournalHeader =
        serde_json::from_str(&first).map_err(|e| Error::json(format!("{} header", path.display()), e))?;
    if existing.schema_hash != header.schema_hash {
        return Err(Error::CacheMismatch {
            path: path.into(),
            what: "schema",
        });
    }
    if existing.ctx_hash != header.ctx_hash {
        return Err(Error::CacheMismatch {
            path: path.into(),
            what: "context",
        });
    }
    let mut cells = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        match serde_json::from_str::<TensorCell>(&line) {
            Ok(c) => cells.push(c),
            Err(_) => break,
        }
    }
    Ok(cells)
}

/// Queries every (context, group) cell not already cached.
///
/// Workers issue at most `concurrency` requests at a time; cells are
/// appended to the journal by the calling thread as they complete. On the
/// first failure no new requests are started and the error is returned
/// with the cell's coordinates; finished cells stay journaled.
pub fn collect(
    backend: &dyn Backend,
    ctx: &ContextSet,
    schema: &WordSchema,
    opts: &CollectOptions,
) -> Result<CollectOutcome> {
    if ctx.is_empty() {
        return Err(Error::EmptyContextSet);
    }
    schema.validate()?;
    let schema_hash = canonical_hash(schema);
    let ctx_hash = canonical_hash(ctx);
    let context_ids = ctx.ids();
    let group_ids = schema.group_ids();
    let candidates = schema.candidate_words();

    let mut done: HashMap<(String, String), TensorCell> = HashMap::new();
    if let Some(path) = &opts.cache_path {
        if path.exists() {
            let existing = ProbabilityTensor::load(path)?;
            if existing.meta.schema_hash != schema_hash {
                return Err(Error::CacheMismatch {
                    path: path.clone(),
                    what: "schema",
                });
            }
            if existing.meta.ctx_hash != ctx_hash {
                return Err(Error::CacheMismatch {
                    path: path.clone(),
                    what: "context",
                });
            }
            if existing.check_complete(&context_ids, &group_ids, &candidates).is_ok() {
                return Ok(CollectOutcome {
                    tensor: existing,
                    queried: 0,
                    warnings: Vec::new(),
                });
            }
            for c in existing.cells {
                done.insert((c.context_id.clone(), c.group_id.clone()), c);
            }
        }
        let header = JournalHeader {
            schema_hash: schema_hash.clone(),
            ctx_hash: ctx_hash.clone(),
        };
        for c in read_journal(&journal_path(path), &header)? {
            done.insert((c.context_id.clone(), c.group_id.clone()), c);
        }
    }

    let plan = plan_requests(ctx, schema, opts.slot)?;
    let pending: Vec<&ProbeRequest> = plan
        .iter()
        .filter(|r| !done.contains_key(&(r.context_id.clone(), r.group_id.clone())))
        .collect();

    let mut journal = match &opts.cache_path {
        Some(path) => Some(open_journal(&journal_path(path), &schema_hash, &ctx_hash)?),
        None => None,
    };

    let mut warnings = Vec::new();
    let mut first_error: Option<Error> = None;
    let issued = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = opts.concurrency.max(1).min(pending.len().max(1));

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<QueryOutcome>)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, next, stop, issued) = (&pending, &next, &stop, &issued);
            scope.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(req) = pending.get(i) else { break };
                issued.fetch_add(1, Ordering::SeqCst);
                let res = backend.query(req);
                if res.is_err() {
                    stop.store(true, Ordering::SeqCst);
                }
                if tx.send((i, res)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        for (i, res) in rx {
            let req = pending[i];
            let cell_err = |source: Error| Error::Cell {
                context_id: req.context_id.clone(),
                group_id: req.group_id.clone(),
                source: Box::new(source),
            };
            let outcome = match res.and_then(|o| validate_outcome(req, o)) {
                Ok(o) => o,
                Err(e) => {
                    stop.store(true, Ordering::SeqCst);
                    first_error.get_or_insert(cell_err(e));
                    continue;
                }
            };
            warnings.extend(outcome.warnings);
            let cell = TensorCell {
                context_id: req.context_id.clone(),
                group_id: req.group_id.clone(),
                probs: outcome.probs.into_iter().map(|t| (t.word, t.prob)).collect(),
            };
            if let Some(j) = journal.as_mut() {
                if let Err(e) = append_cell(j, &cell) {
                    stop.store(true, Ordering::SeqCst);
                    first_error.get_or_insert(e);
                    continue;
                }
            }
            done.insert((cell.context_id.clone(), cell.group_id.clone()), cell);
        }
    });

    if let Some(e) = first_error {
        return Err(e);
    }

    let mut cells = Vec::with_capacity(plan.len());
    for r in &plan {
        let cell = done
            .remove(&(r.context_id.clone(), r.group_id.clone()))
            .expect("every planned cell is done");
        cells.push(cell);
    }
    let tensor = ProbabilityTensor {
        meta: TensorMeta {
            backend: backend.describe(),
            schema_hash,
            ctx_hash,
            created: tensor::unix_now(),
        },
        cells,
    };
    if let Some(path) = &opts.cache_path {
        drop(journal);
        tensor.save(path)?;
        let jp = journal_path(path);
        std::fs::remove_file(&jp).map_err(|e| Error::io(&jp, e))?;
    }
    Ok(CollectOutcome {
        tensor,
        queried: issued.into_inner(),
        warnings,
    })
}

fn validate_outcome(req: &ProbeRequest, outcome: QueryOutcome) -> Result<QueryOutcome> {
    if outcome.probs.len() != req.candidates.len()
        || outcome.probs.iter().zip(&req.candidates).any(|(t, w)| &t.word != w)
    {
        return Err(Error::MalformedResponse(
            "backend did not return one probability per candidate".into(),
        ));
    }
    if let Some(t) = outcome
        .probs
        .iter()
        .find(|t| !t.prob.is_finite() || t.prob < 0.0 || t.prob > 1.0)
    {
        return Err(Error::MalformedResponse(format!(
            "probability {} for `{}`",
            t.prob, t.word
        )));
    }
    Ok(outcome)
}

fn open_journal(path: &Path, schema_hash: &str, ctx_hash: &str) -> Result<std::fs::File> {
    let fresh = !path.exists() || std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    if fresh {
        let header = JournalHeader {
            schema_hash: schema_hash.into(),
            ctx_hash: ctx_hash.into(),
        };
        let mut line = serde_json::to_vec(&header).map_err(|e| Error::json("journal header", e))?;
        line.push(b'\n');
        f.write_all(&line).map_err(|e| Error::io(path, e))?;
    }
    Ok(f)
}

fn append_cell(f: &mut std::fs::File, cell: &TensorCell) -> Result<()> {
    let mut line = serde_json::to_vec(cell).map_err(|e| Error::json("journal cell", e))?;
    line.push(b'\n');
    f.write_all(&line)
        .and_then(|_| f.flush())
        .map_err(|e| Error::io("tensor journal", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::ContextTemplate;
    use crate::reference::BaselineKind;
    use std::sync::Mutex;

    fn schema() -> WordSchema {
        serde_json::from_str(
            r#"{
                "groups": [
                    {"id": "doctor", "words": ["doctor"]},
                    {"id": "nurse", "words": ["nurse"]},
                    {"id": "pilot", "words": ["pilot"]}
                ],
                "categories": [
                    {"id": "male", "words": ["he", "him"]},
                    {"id": "female", "words": ["she", "her"]}
                ]
            }"#,
        )
        .unwrap()
    }

    fn contexts() -> ContextSet {
        ContextSet {
            templates: vec![
                ContextTemplate::new("The [X] said that [Y]", 3).unwrap(),
                ContextTemplate::new("The [X] stated that [Y]", 1).unwrap(),
            ],
            mode: SlotOrder::XThenY,
        }
    }

    /// Deterministic backend that counts calls and can fail on demand.
    struct Scripted {
        calls: AtomicUsize,
        fail_on: Mutex<Option<(String, String)>>,
    }

    impl Scripted {
        fn new() -> Self {
            Self {
                calls: AtomicUsize::new(0),
                fail_on: Mutex::new(None),
            }
        }
    }

    impl Backend for Scripted {
        fn describe(&self) -> String {
            "scripted".into()
        }

        fn query(&self, req: &ProbeRequest) -> Result<QueryOutcome> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if let Some((c, g)) = &*self.fail_on.lock().unwrap() {
                if c == &req.context_id && g == &req.group_id {
                    return Err(Error::BackendUnavailable("scripted failure".into()));
                }
            }
            let base = 0.1 + 0.05 * req.group_index as f64 + 0.01 * req.context_index as f64;
            Ok(QueryOutcome::from_lookup(req, |w| {
                Some(match w {
                    "he" => base,
                    "him" => base / 2.0,
                    "she" => 0.2,
                    _ => 0.05,
                })
            }))
        }
    }

    #[test]
    fn render_examples() {
        assert_eq!(
            render_prompt("The [X] said that [Y]", "doctor", SlotOrder::XThenY).unwrap(),
            "The doctor said that [Y]"
        );
        assert_eq!(
            render_prompt("The [X], who came, is [Y]", "Nurse", SlotOrder::YAtEnd).unwrap(),
            "The nurse, who came, is [Y]"
        );
        assert_eq!(
            render_prompt("The [X] saw [Y] there.", "nurse", SlotOrder::YAtEnd).unwrap(),
            "The nurse saw [Y]"
        );
        assert!(matches!(
            render_prompt("The person said that [Y]", "doctor", SlotOrder::XThenY),
            Err(Error::BadTemplate(_))
        ));
        assert!(render_prompt("The [X] said that [Y]", " ", SlotOrder::XThenY).is_err());
    }

    #[test]
    fn collect_fills_every_cell() {
        let b = Scripted::new();
        let out = collect(&b, &contexts(), &schema(), &CollectOptions::new(SlotConvention::Masked)).unwrap();
        assert_eq!(out.tensor.cells.len(), 6);
        assert_eq!(out.queried, 6);
        for c in &out.tensor.cells {
            assert_eq!(c.probs.len(), 4);
        }
        out.tensor
            .check_complete(&contexts().ids(), &schema().group_ids(), &schema().candidate_words())
            .unwrap();
    }

    #[test]
    fn resume_after_failure_requeries_only_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tensor.json");
        let mut opts = CollectOptions::new(SlotConvention::Masked);
        opts.cache_path = Some(path.clone());
        opts.concurrency = 1;

        let b = Scripted::new();
        *b.fail_on.lock().unwrap() = Some(("The [X] stated that [Y]".into(), "nurse".into()));
        let err = collect(&b, &contexts(), &schema(), &opts).unwrap_err();
        match &err {
            Error::Cell {
                context_id, group_id, ..
            } => {
                assert_eq!(context_id, "The [X] stated that [Y]");
                assert_eq!(group_id, "nurse");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(err.is_backend());
        // 4 cells done, the 5th failed
        assert_eq!(b.calls.load(Ordering::SeqCst), 5);
        assert!(!path.exists());

        let b2 = Scripted::new();
        let out = collect(&b2, &contexts(), &schema(), &opts).unwrap();
        assert_eq!(out.queried, 2);
        assert_eq!(b2.calls.load(Ordering::SeqCst), 2);
        assert!(path.exists());
        assert!(!journal_path(&path).exists());

        let b3 = Scripted::new();
        let again = collect(&b3, &contexts(), &schema(), &opts).unwrap();
        assert_eq!(again.queried, 0);
        assert_eq!(b3.calls.load(Ordering::SeqCst), 0);
        assert_eq!(again.tensor.cells, out.tensor.cells);

        // the uninterrupted result is identical
        let fresh = collect(
            &Scripted::new(),
            &contexts(),
            &schema(),
            &CollectOptions::new(SlotConvention::Masked),
        )
        .unwrap();
        assert_eq!(fresh.tensor.cells, out.tensor.cells);
    }

    #[test]
    fn cache_from_other_inputs_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tensor.json");
        let mut opts = CollectOptions::new(SlotConvention::Masked);
        opts.cache_path = Some(path.clone());
        collect(&Scripted::new(), &contexts(), &schema(), &opts).unwrap();
        let mut other = schema();
        other.groups.pop();
        assert!(matches!(
            collect(&Scripted::new(), &contexts(), &other, &opts),
            Err(Error::CacheMismatch { what: "schema", .. })
        ));
    }

    #[test]
    fn torn_journal_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tensor.json");
        let header = JournalHeader {
            schema_hash: canonical_hash(&schema()),
            ctx_hash: canonical_hash(&contexts()),
        };
        let cell = TensorCell {
            context_id: "The [X] said that [Y]".into(),
            group_id: "doctor".into(),
            probs: [("he", 0.5), ("him", 0.1), ("she", 0.3), ("her", 0.1)]
                .into_iter()
                .map(|(w, p)| (w.to_string(), p))
                .collect(),
        };
        let text = format!(
            "{}\n{}\n{{\"context_id\": \"The",
            serde_json::to_string(&header).unwrap(),
            serde_json::to_string(&cell).unwrap()
        );
        std::fs::write(journal_path(&path), text).unwrap();
        let mut opts = CollectOptions::new(SlotConvention::Masked);
        opts.cache_path = Some(path.clone());
        let b = Scripted::new();
        let out = collect(&b, &contexts(), &schema(), &opts).unwrap();
        assert_eq!(out.queried, 5);
        assert_eq!(out.tensor.cells[0], cell);
    }

    #[test]
    fn file_backend_reproduces_tensor() {
        let first = collect(
            &Scripted::new(),
            &contexts(),
            &schema(),
            &CollectOptions::new(SlotConvention::Masked),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        first.tensor.save(&path).unwrap();
        let fb = FileBackend::open(&path).unwrap();
        let second = collect(
            &fb,
            &contexts(),
            &schema(),
            &CollectOptions::new(SlotConvention::Masked),
        )
        .unwrap();
        assert_eq!(first.tensor.cells, second.tensor.cells);
        assert_eq!(first.tensor.content_hash(), second.tensor.content_hash());
    }

    #[test]
    fn baseline_backend_cells() {
        let spec = BaselineSpec::new(BaselineKind::Stereotyped, 3, 2, 2);
        let b = BaselineBackend::new(spec, &schema()).unwrap();
        let out = collect(&b, &contexts(), &schema(), &CollectOptions::new(SlotConvention::Masked)).unwrap();
        let doctor = &out.tensor.cells[0];
        assert_eq!(doctor.probs["he"], 1.0);
        assert_eq!(doctor.probs["she"], 0.0);
        assert_eq!(doctor.probs["him"], 0.0);
        let nurse = &out.tensor.cells[1];
        assert_eq!(nurse.probs["she"], 1.0);

        let wrong = BaselineSpec::new(BaselineKind::Stereotyped, 2, 2, 2);
        assert!(matches!(
            BaselineBackend::new(wrong, &schema()),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn missing_candidate_becomes_zero_with_warning() {
        let req = &plan_requests(&contexts(), &schema(), SlotConvention::Masked).unwrap()[0];
        let o = QueryOutcome::from_lookup(req, |w| (w == "he").then_some(0.4));
        assert_eq!(o.probs.len(), 4);
        assert_eq!(o.probs[2].prob, 0.0);
        assert_eq!(o.warnings.len(), 3);
    }
}
