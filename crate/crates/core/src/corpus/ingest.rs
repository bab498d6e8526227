use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CaptionRecord, CorpusError, Region, RegionSource};
use crate::schema::AttributeSchema;
use crate::text;

/// Supported annotation layouts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusFormat {
    /// Caption annotation JSON (`images` + `annotations`) with a
    /// `sample_id<TAB>label` sidecar.
    CocoCaptions { attributes: PathBuf },
    /// ArtEmis-style CSV: one utterance per row, labels decided by majority vote.
    ArtemisTable,
    /// `sample_id<TAB>label<TAB>gt_caption[<TAB>model_caption]`.
    PlainTsv,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum RejectionReason {
    UnknownLabel(String),
    MissingLabel,
    ConflictingLabel(String),
    ReservedToken,
    EmptyCaption,
    UnknownSample,
}

/// A record dropped at ingestion, with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub sample_id: Option<String>,
    pub line: usize,
    pub reason: RejectionReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub records: Vec<CaptionRecord>,
    pub rejections: Vec<Rejection>,
}

impl Ingested {
    /// Records skipped because they carried no label at all.
    pub fn missing_label_count(&self) -> usize {
        self.rejections.iter().filter(|r| r.reason == RejectionReason::MissingLabel).count()
    }

    /// Tab-separated rejection report: `line<TAB>sample_id<TAB>reason`.
    pub fn rejection_report(&self) -> String {
        let mut out = String::from("line\tsample_id\treason\n");
        for r in &self.rejections {
            let reason = match &r.reason {
                RejectionReason::UnknownLabel(l) => format!("unknown label {l:?}"),
                RejectionReason::MissingLabel => "missing label".into(),
                RejectionReason::ConflictingLabel(l) => format!("conflicting label {l:?}"),
                RejectionReason::ReservedToken => "reserved token in caption".into(),
                RejectionReason::EmptyCaption => "empty caption".into(),
                RejectionReason::UnknownSample => "unknown sample".into(),
            };
            out.push_str(&format!("{}\t{}\t{}\n", r.line, r.sample_id.as_deref().unwrap_or(""), reason));
        }
        out
    }
}

pub fn ingest_corpus(
    annotation_file: &Path,
    schema: &AttributeSchema,
    format: &CorpusFormat,
) -> Result<Ingested, CorpusError> {
    let source = read(annotation_file)?;
    let origin = annotation_file.display().to_string();
    let mut out = match format {
        CorpusFormat::PlainTsv => parse_plain_tsv(&source, &origin, schema),
        CorpusFormat::CocoCaptions { attributes } => {
            let sidecar = read(attributes)?;
            parse_coco(&source, &origin, &sidecar, &attributes.display().to_string(), schema)
        }
        CorpusFormat::ArtemisTable => parse_artemis(&source, &origin, schema),
    }?;
    out.records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    out.rejections.sort_by(|a, b| (a.line, &a.sample_id).cmp(&(b.line, &b.sample_id)));
    Ok(out)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::NotFound(path.display().to_string()),
        _ => CorpusError::Io(e),
    })
}

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { path: origin.to_string(), line, message: message.into() }
}

/// Shared label and caption checks. Returns the rejection reason, if any.
fn check_label(schema: &AttributeSchema, label: &str) -> Result<String, RejectionReason> {
    let label = label.trim().to_lowercase();
    if label.is_empty() {
        return Err(RejectionReason::MissingLabel);
    }
    if schema.class_index(&label).is_none() {
        return Err(RejectionReason::UnknownLabel(label));
    }
    Ok(label)
}

fn check_caption(caption: &str) -> Result<String, RejectionReason> {
    if text::contains_reserved(caption) {
        return Err(RejectionReason::ReservedToken);
    }
    let norm = text::normalize(caption);
    if norm.is_empty() {
        return Err(RejectionReason::EmptyCaption);
    }
    Ok(norm)
}

struct Builder {
    records: BTreeMap<String, (usize, CaptionRecord)>,
    rejected: BTreeMap<String, ()>,
    rejections: Vec<Rejection>,
}

impl Builder {
    fn new() -> Self {
        Self { records: BTreeMap::new(), rejected: BTreeMap::new(), rejections: Vec::new() }
    }

    fn reject(&mut self, id: Option<&str>, line: usize, reason: RejectionReason) {
        if let Some(id) = id {
            self.records.remove(id);
            self.rejected.insert(id.to_string(), ());
        }
        self.rejections.push(Rejection { sample_id: id.map(str::to_string), line, reason });
    }

    fn finish(self) -> Ingested {
        Ingested { records: self.records.into_values().map(|(_, r)| r).collect(), rejections: self.rejections }
    }
}

fn parse_plain_tsv(source: &str, origin: &str, schema: &AttributeSchema) -> Result<Ingested, CorpusError> {
    let mut b = Builder::new();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if !(3..=4).contains(&cols.len()) {
            return Err(parse_err(origin, line, format!("expected 3 or 4 tab-separated columns, got {}", cols.len())));
        }
        let id = cols[0].trim();
        if id.is_empty() {
            return Err(parse_err(origin, line, "empty sample_id"));
        }
        if b.rejected.contains_key(id) {
            continue;
        }
        let label = match check_label(schema, cols[1]) {
            Ok(l) => l,
            Err(reason) => {
                b.reject(Some(id), line, reason);
                continue;
            }
        };
        let gt = match check_caption(cols[2]) {
            Ok(c) => c,
            Err(reason) => {
                b.reject(Some(id), line, reason);
                continue;
            }
        };
        let model = match cols.get(3).map(|c| c.trim()).filter(|c| !c.is_empty()) {
            None => None,
            Some(c) => match check_caption(c) {
                Ok(c) => Some(c),
                Err(reason) => {
                    b.reject(Some(id), line, reason);
                    continue;
                }
            },
        };
        match b.records.get_mut(id) {
            None => {
                let mut rec = CaptionRecord::new(id, label, gt);
                rec.model_caption = model;
                b.records.insert(id.to_string(), (line, rec));
            }
            Some((_, rec)) => {
                let conflict = rec.attribute_label != label
                    || matches!((&rec.model_caption, &model), (Some(a), Some(m)) if a != m);
                if conflict {
                    b.reject(Some(id), line, RejectionReason::ConflictingLabel(label));
                    continue;
                }
                rec.gt_captions.push(gt);
                if rec.model_caption.is_none() {
                    rec.model_caption = model;
                }
            }
        }
    }
    Ok(b.finish())
}

/// Serializes records back into the plain TSV layout. One line per reference
/// caption; the model caption rides on the first line of each record.
pub fn write_plain_tsv(records: &[CaptionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        for (i, gt) in r.gt_captions.iter().enumerate() {
            let model = if i == 0 { r.model_caption.as_deref().unwrap_or("") } else { "" };
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.sample_id, r.attribute_label, gt, model));
        }
    }
    out
}

fn json_id(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_sidecar(source: &str, origin: &str) -> Result<HashMap<String, (usize, String)>, CorpusError> {
    let mut labels = HashMap::new();
    for (i, raw) in source.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let mut cols = raw.split('\t');
        let (Some(id), label, None) = (cols.next(), cols.next().unwrap_or(""), cols.next()) else {
            return Err(parse_err(origin, i + 1, "expected sample_id<TAB>attribute_label"));
        };
        labels.insert(id.trim().to_string(), (i + 1, label.to_string()));
    }
    Ok(labels)
}

fn parse_coco(
    source: &str,
    origin: &str,
    sidecar: &str,
    sidecar_origin: &str,
    schema: &AttributeSchema,
) -> Result<Ingested, CorpusError> {
    let doc: Value = serde_json::from_str(source).map_err(|e| parse_err(origin, e.line(), e.to_string()))?;
    let labels = parse_sidecar(sidecar, sidecar_origin)?;
    let images =
        doc.get("images").and_then(Value::as_array).ok_or_else(|| parse_err(origin, 1, "missing `images` array"))?;
    let annotations = doc
        .get("annotations")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err(origin, 1, "missing `annotations` array"))?;

    let mut captions: HashMap<String, Vec<&str>> = HashMap::new();
    for (i, ann) in annotations.iter().enumerate() {
        let id = ann.get("image_id").and_then(json_id);
        let cap = ann.get("caption").and_then(Value::as_str);
        let (Some(id), Some(cap)) = (id, cap) else {
            return Err(parse_err(origin, 1, format!("annotation #{i} lacks image_id or caption")));
        };
        captions.entry(id).or_default().push(cap);
    }

    let mut b = Builder::new();
    for (i, img) in images.iter().enumerate() {
        let id =
            img.get("id").and_then(json_id).ok_or_else(|| parse_err(origin, 1, format!("image #{i} lacks an id")))?;
        let Some((line, raw_label)) = labels.get(&id) else {
            b.reject(Some(&id), 0, RejectionReason::MissingLabel);
            continue;
        };
        let label = match check_label(schema, raw_label) {
            Ok(l) => l,
            Err(reason) => {
                b.reject(Some(&id), *line, reason);
                continue;
            }
        };
        let mut gts = Vec::new();
        let mut bad = None;
        for cap in captions.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
            match check_caption(cap) {
                Ok(c) => gts.push(c),
                Err(reason) => {
                    bad = Some(reason);
                    break;
                }
            }
        }
        if gts.is_empty() && bad.is_none() {
            bad = Some(RejectionReason::EmptyCaption);
        }
        if let Some(reason) = bad {
            b.reject(Some(&id), *line, reason);
            continue;
        }
        let mut rec = CaptionRecord::new(id.clone(), label, String::new());
        rec.gt_captions = gts;
        rec.image_ref = img.get("file_name").and_then(Value::as_str).map(str::to_string);
        b.records.insert(id, (*line, rec));
    }
    Ok(b.finish())
}

fn parse_artemis(source: &str, origin: &str, schema: &AttributeSchema) -> Result<Ingested, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(origin, 1, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| parse_err(origin, 1, format!("missing column {name:?}")))
    };
    let (style, painting, emotion, utterance) =
        (col("art_style")?, col("painting")?, col("emotion")?, col("utterance")?);

    // Per painting: first line, utterances, and per-class vote counts.
    let mut groups: BTreeMap<String, (usize, Vec<String>, Vec<usize>)> = BTreeMap::new();
    let mut b = Builder::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(origin, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = format!("{}/{}", row[style].trim(), row[painting].trim());
        let raw_label = row[emotion].split_whitespace().collect::<Vec<_>>().join("-");
        let label = match check_label(schema, &raw_label) {
            Ok(l) => l,
            Err(reason) => {
                b.rejections.push(Rejection { sample_id: Some(id), line, reason });
                continue;
            }
        };
        let caption = match check_caption(&row[utterance]) {
            Ok(c) => c,
            Err(reason) => {
                b.rejections.push(Rejection { sample_id: Some(id), line, reason });
                continue;
            }
        };
        let entry = groups.entry(id).or_insert_with(|| (line, Vec::new(), vec![0; schema.num_classes()]));
        entry.1.push(caption);
        entry.2[schema.class_index(&label).expect("checked")] += 1;
    }
    for (id, (line, utterances, votes)) in groups {
        // Majority vote; ties go to the lowest class index.
        let mut best = 0;
        for (i, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = i;
            }
        }
        let mut rec = CaptionRecord::new(id.clone(), schema.classes()[best].clone(), String::new());
        rec.gt_captions = utterances;
        b.records.insert(id, (line, rec));
    }
    Ok(b.finish())
}

/// Attaches generated captions from `sample_id<TAB>caption` lines or a JSON
/// results array of `{"image_id", "caption"}` objects (chosen by `.json`
/// extension). Unknown ids and reserved tokens come back as rejections.
pub fn attach_model_captions(records: &mut [CaptionRecord], path: &Path) -> Result<Vec<Rejection>, CorpusError> {
    let source = read(path)?;
    let origin = path.display().to_string();
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    if path.extension().is_some_and(|e| e == "json") {
        let doc: Value = serde_json::from_str(&source).map_err(|e| parse_err(&origin, e.line(), e.to_string()))?;
        let arr = doc.as_array().ok_or_else(|| parse_err(&origin, 1, "expected a JSON array"))?;
        for (i, item) in arr.iter().enumerate() {
            let id = item.get("image_id").and_then(json_id);
            let cap = item.get("caption").and_then(Value::as_str);
            let (Some(id), Some(cap)) = (id, cap) else {
                return Err(parse_err(&origin, 1, format!("result #{i} lacks image_id or caption")));
            };
            pairs.push((i + 1, id, cap.to_string()));
        }
    } else {
        for (i, raw) in source.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let Some((id, cap)) = raw.split_once('\t') else {
                return Err(parse_err(&origin, i + 1, "expected sample_id<TAB>caption"));
            };
            pairs.push((i + 1, id.trim().to_string(), cap.to_string()));
        }
    }
    let index: HashMap<String, usize> = records.iter().enumerate().map(|(i, r)| (r.sample_id.clone(), i)).collect();
    let mut rejections = Vec::new();
    for (line, id, cap) in pairs {
        let Some(&i) = index.get(&id) else {
            rejections.push(Rejection { sample_id: Some(id), line, reason: RejectionReason::UnknownSample });
            continue;
        };
        match check_caption(&cap) {
            Ok(c) => records[i].model_caption = Some(c),
            Err(reason) => rejections.push(Rejection { sample_id: Some(id), line, reason }),
        }
    }
    Ok(rejections)
}

#[derive(Deserialize)]
struct RegionLine {
    sample_id: String,
    source: RegionSource,
    regions: Vec<Region>,
}

/// Reads a JSON Lines region file: `{"sample_id", "source", "regions": [...]}`.
/// Each region is `{"box": {"x_min", "y_min", "x_max", "y_max"}}` or
/// `{"polygon": [[x, y], ...]}`.
pub fn attach_regions(records: &mut [CaptionRecord], path: &Path) -> Result<Vec<Rejection>, CorpusError> {
    let source = read(path)?;
    let origin = path.display().to_string();
    let index: HashMap<String, usize> = records.iter().enumerate().map(|(i, r)| (r.sample_id.clone(), i)).collect();
    let mut rejections = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: RegionLine = serde_json::from_str(raw).map_err(|e| parse_err(&origin, i + 1, e.to_string()))?;
        if let Some(bad) = parsed.regions.iter().position(|r| !r.is_well_formed()) {
            return Err(parse_err(&origin, i + 1, format!("region {bad} is malformed")));
        }
        match index.get(&parsed.sample_id) {
            Some(&k) => {
                records[k].regions = parsed.regions;
                records[k].region_source = parsed.source;
            }
            None => rejections.push(Rejection {
                sample_id: Some(parsed.sample_id),
                line: i + 1,
                reason: RejectionReason::UnknownSample,
            }),
        }
    }
    Ok(rejections)
}
