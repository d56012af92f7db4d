use std::collections::{BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;

use super::lexer::{tokenize, Tok, Token};
use super::ParseOutcome;
use crate::diagnostic::{Diagnostic, SourceSpan};
use crate::metrics::MetricId;
use crate::model::{
    is_iso_date, is_sha256_hex, AssuranceCase, Claim, ClaimKind, Comparator, DocumentPayload, Evidence,
    EvidencePayload, MetricPayload, NodeId, RecordPayload, Waiver,
};

/// Syntax error already recorded as a diagnostic.
struct Bail;

type PResult<T> = Result<T, Bail>;

#[derive(Debug)]
struct Spanned<T> {
    value: T,
    span: SourceSpan,
}

#[derive(Debug)]
struct ClaimNode {
    id: Spanned<String>,
    statement: Spanned<String>,
    stage: Option<String>,
    considers: BTreeSet<String>,
    children: Vec<ClaimNode>,
    by: Vec<Spanned<String>>,
}

#[derive(Debug)]
enum Value {
    Str(String),
    Num(f64),
}

#[derive(Debug)]
struct Field {
    key: Spanned<String>,
    value: Value,
    value_span: SourceSpan,
}

#[derive(Debug)]
struct EvidenceNode {
    id: Spanned<String>,
    title: Spanned<String>,
    kind: Spanned<String>,
    fields: Vec<Field>,
    close: SourceSpan,
}

#[derive(Debug)]
struct WaiverNode {
    id: Spanned<String>,
    rationale: Spanned<String>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

pub(crate) fn parse(text: &str) -> ParseOutcome {
    let text = text.strip_prefix('\u{FEFF}').unwrap_or(text);
    let mut diags = Vec::new();
    let tokens = tokenize(text, &mut diags);
    let mut p = Parser { tokens, pos: 0, diags };
    let file = p.file();
    let mut diags = p.diags;
    let case = file.and_then(|(title, goal, evidence, waivers)| build(title, goal, evidence, waivers, &mut diags));
    diags.sort_by_key(|d| d.span.map(|s| (s.line, s.column)));
    let has_errors = diags.iter().any(Diagnostic::is_error);
    ParseOutcome {
        case: if has_errors { None } else { case },
        diagnostics: diags,
    }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn error(&mut self, expected: &str) -> Bail {
        let t = self.peek().clone();
        self.diags.push(
            Diagnostic::error("P-002", format!("expected {expected}, found {}", t.tok.describe())).at(t.span),
        );
        Bail
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> PResult<SourceSpan> {
        if self.peek().tok == tok {
            Ok(self.advance().span)
        } else {
            Err(self.error(expected))
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<SourceSpan> {
        if self.is_keyword(kw) {
            Ok(self.advance().span)
        } else {
            Err(self.error(&format!("'{kw}'")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Spanned<String>> {
        match self.peek().tok.clone() {
            Tok::Ident(s) => {
                let span = self.advance().span;
                Ok(Spanned { value: s, span })
            }
            _ => Err(self.error(what)),
        }
    }

    fn string(&mut self, what: &str) -> PResult<Spanned<String>> {
        match self.peek().tok.clone() {
            Tok::Str(s) => {
                let span = self.advance().span;
                Ok(Spanned { value: s, span })
            }
            _ => Err(self.error(what)),
        }
    }

    fn non_empty(&mut self, s: &Spanned<String>, what: &str) {
        if s.value.is_empty() {
            self.diags
                .push(Diagnostic::error("P-012", format!("{what} must not be empty")).at(s.span));
        }
    }

    /// Skips to the next top-level keyword (`goal`, `evidence`, `waive`) or
    /// end of input.
    fn recover(&mut self) {
        loop {
            match &self.peek().tok {
                Tok::Eof => return,
                Tok::Ident(s) if matches!(s.as_str(), "goal" | "evidence" | "waive") => return,
                _ => {
                    self.advance();
                }
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn file(&mut self) -> Option<(Spanned<String>, Option<ClaimNode>, Vec<EvidenceNode>, Vec<WaiverNode>)> {
        if !self.is_keyword("case") {
            let span = self.peek().span;
            self.diags.push(Diagnostic::error("P-001", "expected 'case'").at(span));
            return None;
        }
        self.advance();
        let title = self.string("case title string").ok()?;
        self.non_empty(&title, "case title");
        self.expect(Tok::LBrace, "'{'").ok()?;

        let mut goal: Option<ClaimNode> = None;
        let mut evidence = Vec::new();
        let mut waivers = Vec::new();
        let mut closed = false;
        let mut goal_seen = false;
        loop {
            goal_seen |= self.is_keyword("goal");
            let step = match self.peek().tok.clone() {
                Tok::Ident(kw) if kw == "goal" => self.claim("goal").map(|g| {
                    if goal.is_some() {
                        self.diags.push(
                            Diagnostic::error("P-009", format!("second goal {}; a case has exactly one goal", g.id.value))
                                .at(g.id.span),
                        );
                    } else {
                        goal = Some(g);
                    }
                }),
                Tok::Ident(kw) if kw == "evidence" => self.evidence().map(|e| evidence.push(e)),
                Tok::Ident(kw) if kw == "waive" => self.waiver().map(|w| waivers.push(w)),
                Tok::RBrace => {
                    self.advance();
                    closed = true;
                    break;
                }
                Tok::Eof => Err(self.error("'}' closing the case")),
                _ => Err(self.error("'goal', 'evidence', 'waive' or '}'")),
            };
            if step.is_err() {
                self.recover();
                if self.peek().tok == Tok::Eof {
                    break;
                }
            }
        }
        if closed && self.peek().tok != Tok::Eof {
            let span = self.peek().span;
            self.diags
                .push(Diagnostic::error("P-005", "unexpected content after the case block").at(span));
        }
        if !goal_seen {
            self.diags
                .push(Diagnostic::error("P-009", "case has no goal").at(title.span));
        }
        Some((title, goal, evidence, waivers))
    }

    fn claim(&mut self, kw: &str) -> PResult<ClaimNode> {
        self.keyword(kw)?;
        let id = self.ident("claim id")?;
        let statement = self.string("claim statement string")?;
        self.non_empty(&statement, "claim statement");
        let mut node = ClaimNode {
            id,
            statement,
            stage: None,
            considers: BTreeSet::new(),
            children: Vec::new(),
            by: Vec::new(),
        };
        loop {
            if self.is_keyword("stage") {
                let kw_span = self.advance().span;
                self.expect(Tok::LParen, "'('")?;
                let stage = self.ident("stage id")?;
                self.expect(Tok::RParen, "')'")?;
                if node.stage.is_some() {
                    self.diags.push(
                        Diagnostic::error("P-013", format!("claim {} has more than one stage", node.id.value))
                            .at(kw_span),
                    );
                }
                node.stage = Some(stage.value);
            } else if self.is_keyword("considers") {
                self.advance();
                self.expect(Tok::LParen, "'('")?;
                node.considers.insert(self.ident("consideration id")?.value);
                while self.peek().tok == Tok::Comma {
                    self.advance();
                    node.considers.insert(self.ident("consideration id")?.value);
                }
                self.expect(Tok::RParen, "')'")?;
            } else {
                break;
            }
        }
        if self.peek().tok == Tok::Semi {
            self.advance();
            return Ok(node);
        }
        self.expect(Tok::LBrace, "'{', ';', 'stage' or 'considers'")?;
        loop {
            match &self.peek().tok {
                Tok::RBrace => {
                    self.advance();
                    return Ok(node);
                }
                Tok::Ident(s) if s == "claim" => {
                    let child = self.claim("claim")?;
                    node.children.push(child);
                }
                Tok::Ident(s) if s == "by" => {
                    self.advance();
                    let r = self.ident("evidence id")?;
                    self.expect(Tok::Semi, "';'")?;
                    node.by.push(r);
                }
                _ => return Err(self.error("'claim', 'by' or '}'")),
            }
        }
    }

    fn evidence(&mut self) -> PResult<EvidenceNode> {
        self.keyword("evidence")?;
        let id = self.ident("evidence id")?;
        let title = self.string("evidence title string")?;
        self.non_empty(&title, "evidence title");
        self.keyword("kind")?;
        self.expect(Tok::LParen, "'('")?;
        let kind = self.ident("evidence kind")?;
        if !matches!(kind.value.as_str(), "document" | "metric" | "record") {
            self.diags.push(
                Diagnostic::error(
                    "P-002",
                    format!("expected document, metric or record, found '{}'", kind.value),
                )
                .at(kind.span),
            );
            return Err(Bail);
        }
        self.expect(Tok::RParen, "')'")?;
        self.expect(Tok::LBrace, "'{'")?;
        let mut fields = Vec::new();
        loop {
            if self.peek().tok == Tok::RBrace {
                let close = self.advance().span;
                return Ok(EvidenceNode {
                    id,
                    title,
                    kind,
                    fields,
                    close,
                });
            }
            let key = self.ident("payload key or '}'")?;
            self.expect(Tok::Eq, "'='")?;
            let t = self.peek().clone();
            let value = match t.tok {
                Tok::Str(s) => Value::Str(s),
                Tok::Number(n) => Value::Num(n),
                _ => return Err(self.error("string or number")),
            };
            self.advance();
            self.expect(Tok::Semi, "';'")?;
            fields.push(Field {
                key,
                value,
                value_span: t.span,
            });
        }
    }

    fn waiver(&mut self) -> PResult<WaiverNode> {
        self.keyword("waive")?;
        let id = self.ident("consideration id")?;
        let rationale = self.string("waiver rationale string")?;
        self.expect(Tok::Semi, "';'")?;
        if rationale.value.trim().is_empty() {
            self.diags
                .push(Diagnostic::error("P-012", "waiver rationale must not be empty").at(rationale.span));
        }
        Ok(WaiverNode { id, rationale })
    }
}

fn build(
    title: Spanned<String>,
    goal: Option<ClaimNode>,
    evidence: Vec<EvidenceNode>,
    waivers: Vec<WaiverNode>,
    diags: &mut Vec<Diagnostic>,
) -> Option<AssuranceCase> {
    let mut ev_map: IndexMap<NodeId, Evidence> = IndexMap::new();
    let mut declared: HashSet<String> = HashSet::new();
    for e in evidence {
        if !declared.insert(e.id.value.clone()) {
            diags.push(
                Diagnostic::error("P-007", format!("duplicate evidence id {}", e.id.value)).at(e.id.span),
            );
            continue;
        }
        if let Some(payload) = build_payload(&e, diags) {
            let id = NodeId::new(e.id.value).ok()?;
            ev_map.insert(
                id.clone(),
                Evidence {
                    id,
                    title: e.title.value,
                    payload,
                },
            );
        }
    }

    let mut claims: IndexMap<NodeId, Claim> = IndexMap::new();
    let goal = goal?;
    let root_id = NodeId::new(goal.id.value.clone()).ok()?;
    add_claims(goal, ClaimKind::Goal, &declared, &mut claims, diags);

    let mut waiver_list: Vec<Waiver> = Vec::new();
    let mut waived: HashMap<String, SourceSpan> = HashMap::new();
    for w in waivers {
        if waived.insert(w.id.value.clone(), w.id.span).is_some() {
            diags.push(
                Diagnostic::error("P-008", format!("consideration {} is waived more than once", w.id.value))
                    .at(w.id.span),
            );
            continue;
        }
        if let Ok(waiver) = Waiver::new(w.id.value, w.rationale.value) {
            waiver_list.push(waiver);
        }
    }

    Some(AssuranceCase {
        title: title.value,
        root_id,
        claims,
        evidence: ev_map,
        waivers: waiver_list,
        revision: 0,
    })
}

/// Flattens the nested claim tree in pre-order, reporting duplicates and
/// unresolved `by` references.
fn add_claims(
    node: ClaimNode,
    kind: ClaimKind,
    declared: &HashSet<String>,
    claims: &mut IndexMap<NodeId, Claim>,
    diags: &mut Vec<Diagnostic>,
) -> Option<NodeId> {
    let Ok(id) = NodeId::new(node.id.value.clone()) else {
        return None;
    };
    let duplicate = claims.contains_key(&id);
    if duplicate {
        diags.push(Diagnostic::error("P-006", format!("duplicate claim id {id}")).at(node.id.span));
    }
    let mut evidence_refs = BTreeSet::new();
    for r in &node.by {
        if !declared.contains(&r.value) {
            diags.push(
                Diagnostic::error("P-010", format!("unresolved evidence reference {}", r.value))
                    .on(id.as_str())
                    .at(r.span),
            );
            continue;
        }
        let Ok(rid) = NodeId::new(r.value.clone()) else { continue };
        if !evidence_refs.insert(rid) {
            diags.push(
                Diagnostic::warning("P-011", format!("claim {id} references {} more than once", r.value))
                    .on(id.as_str())
                    .at(r.span),
            );
        }
    }
    if !duplicate {
        claims.insert(
            id.clone(),
            Claim {
                id: id.clone(),
                statement: node.statement.value,
                kind,
                stage: node.stage,
                considers: node.considers,
                children: Vec::new(),
                evidence_refs,
            },
        );
    }
    let mut children = Vec::with_capacity(node.children.len());
    for child in node.children {
        if let Some(cid) = add_claims(child, ClaimKind::Intermediate, declared, claims, diags) {
            children.push(cid);
        }
    }
    if duplicate {
        return None;
    }
    if let Some(c) = claims.get_mut(&id) {
        c.children = children;
    }
    Some(id)
}

struct Fields<'a> {
    evidence: &'a EvidenceNode,
    seen: HashSet<&'a str>,
    ok: bool,
}

impl<'a> Fields<'a> {
    fn check_keys(evidence: &'a EvidenceNode, allowed: &[&str], repeatable: &[&str], diags: &mut Vec<Diagnostic>) -> Self {
        let mut seen = HashSet::new();
        let mut ok = true;
        for f in &evidence.fields {
            let key = f.key.value.as_str();
            if !allowed.contains(&key) {
                ok = false;
                diags.push(
                    Diagnostic::error(
                        "P-021",
                        format!("unknown key {key} for {} evidence {}", evidence.kind.value, evidence.id.value),
                    )
                    .on(evidence.id.value.as_str())
                    .at(f.key.span),
                );
            } else if !seen.insert(key) && !repeatable.contains(&key) {
                ok = false;
                diags.push(
                    Diagnostic::error("P-022", format!("duplicate key {key} in evidence {}", evidence.id.value))
                        .on(evidence.id.value.as_str())
                        .at(f.key.span),
                );
            }
        }
        Fields { evidence, seen, ok }
    }

    fn field(&self, key: &str) -> Option<&'a Field> {
        self.evidence.fields.iter().find(|f| f.key.value == key)
    }

    fn invalid(&mut self, f: &Field, why: String, diags: &mut Vec<Diagnostic>) {
        self.ok = false;
        diags.push(
            Diagnostic::error("P-024", why)
                .on(self.evidence.id.value.as_str())
                .at(f.value_span),
        );
    }

    fn string(&mut self, key: &str, required: bool, diags: &mut Vec<Diagnostic>) -> Option<String> {
        let Some(f) = self.field(key) else {
            if required {
                self.ok = false;
                diags.push(
                    Diagnostic::error(
                        "P-023",
                        format!("{} evidence {} is missing key {key}", self.evidence.kind.value, self.evidence.id.value),
                    )
                    .on(self.evidence.id.value.as_str())
                    .at(self.evidence.close),
                );
            }
            return None;
        };
        match &f.value {
            Value::Str(s) => Some(s.clone()),
            Value::Num(_) => {
                self.invalid(f, format!("{key} must be a string"), diags);
                None
            }
        }
    }

    fn strings(&mut self, key: &str, diags: &mut Vec<Diagnostic>) -> Vec<String> {
        let mut out = Vec::new();
        for f in self.evidence.fields.iter().filter(|f| f.key.value == key) {
            match &f.value {
                Value::Str(s) => out.push(s.clone()),
                Value::Num(_) => self.invalid(f, format!("{key} must be a string"), diags),
            }
        }
        out
    }
}

fn build_payload(e: &EvidenceNode, diags: &mut Vec<Diagnostic>) -> Option<EvidencePayload> {
    let payload = match e.kind.value.as_str() {
        "document" => {
            let mut f = Fields::check_keys(e, &["uri", "sha256", "description"], &[], diags);
            let uri = f.string("uri", true, diags);
            let sha256 = f.string("sha256", false, diags);
            if let (Some(sha), Some(field)) = (&sha256, f.field("sha256")) {
                if !is_sha256_hex(sha) {
                    f.invalid(field, "sha256 must be 64 lowercase hex characters".into(), diags);
                }
            }
            let description = f.string("description", false, diags).unwrap_or_default();
            let _ = &f.seen;
            EvidencePayload::Document(DocumentPayload {
                uri: uri?,
                sha256,
                description,
            })
            .pipe_if(f.ok)?
        }
        "metric" => {
            let mut f = Fields::check_keys(
                e,
                &["dataset", "metric", "group", "condition", "comparator", "threshold"],
                &[],
                diags,
            );
            let dataset = f.string("dataset", true, diags);
            let metric = f.string("metric", true, diags).and_then(|m| {
                let parsed = m.parse::<MetricId>();
                if let (Err(why), Some(field)) = (&parsed, f.field("metric")) {
                    f.invalid(field, why.clone(), diags);
                }
                parsed.ok()
            });
            let group = f.string("group", true, diags);
            let condition = f.string("condition", false, diags);
            let comparator = f.string("comparator", true, diags).and_then(|c| {
                let parsed = Comparator::from_symbol(&c);
                if let (None, Some(field)) = (parsed, f.field("comparator")) {
                    f.invalid(field, format!("comparator must be \"<=\" or \">=\", got {c:?}"), diags);
                }
                parsed
            });
            let threshold = match f.field("threshold") {
                None => {
                    f.string("threshold", true, diags);
                    None
                }
                Some(field) => match field.value {
                    Value::Num(n) => Some(n),
                    Value::Str(_) => {
                        f.invalid(field, "threshold must be a number".into(), diags);
                        None
                    }
                },
            };
            EvidencePayload::Metric(MetricPayload {
                dataset_ref: dataset?,
                metric: metric?,
                group_column: group?,
                condition_column: condition,
                comparator: comparator?,
                threshold: threshold?,
            })
            .pipe_if(f.ok)?
        }
        _ => {
            let mut f = Fields::check_keys(e, &["description", "date", "participant"], &["participant"], diags);
            let description = f.string("description", true, diags);
            let date = f.string("date", true, diags);
            if let (Some(d), Some(field)) = (&date, f.field("date")) {
                if !is_iso_date(d) {
                    f.invalid(field, format!("date must be YYYY-MM-DD, got {d:?}"), diags);
                }
            }
            let participants = f.strings("participant", diags);
            EvidencePayload::Record(RecordPayload {
                description: description?,
                date: date?,
                participants,
            })
            .pipe_if(f.ok)?
        }
    };
    Some(payload)
}

trait PipeIf: Sized {
    fn pipe_if(self, ok: bool) -> Option<Self> {
        ok.then_some(self)
    }
}

impl PipeIf for EvidencePayload {}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(o: &ParseOutcome) -> Vec<&str> {
        o.diagnostics.iter().map(|d| d.code.as_str()).collect()
    }

    const EXAMPLE: &str = r#"case "Fair CDSS" { goal C1 "The AI-enabled CDSS is fair" { claim C2 "No patient discrimination" { by E1; } } evidence E1 "Validation report" kind(document) { uri = "reports/val.md"; } }"#;

    #[test]
    fn inline_example_parses() {
        let o = parse(EXAMPLE);
        assert!(o.diagnostics.is_empty(), "{:?}", o.diagnostics);
        let c = o.case.unwrap();
        assert_eq!(c.root_id.as_str(), "C1");
        assert_eq!(c.claim("C1").unwrap().children, vec![NodeId::new("C2").unwrap()]);
        assert!(c.claim("C2").unwrap().evidence_refs.contains("E1"));
        assert_eq!(c.evidence("E1").unwrap().kind(), crate::model::EvidenceKind::Document);
    }

    #[test]
    fn empty_input() {
        let o = parse("");
        assert!(o.case.is_none());
        assert_eq!(codes(&o), ["P-001"]);
        assert_eq!(o.diagnostics[0].span, Some(SourceSpan::new(1, 1, 0)));
        assert_eq!(o.diagnostics[0].message, "expected 'case'");
    }

    #[test]
    fn unresolved_reference_points_at_id() {
        let text = "case \"x\" {\n  goal G1 \"y\" {\n    by E9;\n  }\n}\n";
        let o = parse(text);
        assert!(o.case.is_none());
        assert_eq!(codes(&o), ["P-010"]);
        assert_eq!(o.diagnostics[0].span, Some(SourceSpan::new(3, 8, 2)));
    }

    #[test]
    fn k_unresolved_refs_give_k_diagnostics() {
        let text = r#"case "x" { goal G1 "y" { by A1; claim C2 "z" { by A2; by A3; } claim C3 "w" { by A4; } } }"#;
        let o = parse(text);
        assert_eq!(codes(&o), ["P-010"; 4]);
    }

    #[test]
    fn recovers_at_next_top_level_keyword() {
        let text = r#"case "x" {
  goal G1 "y" { by E1; claim ; }
  evidence E1 "t" kind(document) { uri = "a"; bogus = "b"; }
  evidence E2 "t" kind(widget) { }
  waive FC-PD-01 "";
}"#;
        let o = parse(text);
        assert_eq!(codes(&o), ["P-002", "P-021", "P-002", "P-012"]);
        assert!(o.case.is_none());
    }

    #[test]
    fn payload_key_rules() {
        let text = r#"case "x" { goal G1 "y" { by M1; }
  evidence M1 "kappa" kind(metric) { dataset = "val"; metric = "kappa"; metric = "cohens_kappa"; comparator = "=="; threshold = "0.5"; }
}"#;
        let o = parse(text);
        assert_eq!(codes(&o), ["P-024", "P-022", "P-024", "P-024", "P-023"]);
    }

    #[test]
    fn record_participants_repeat() {
        let text = r#"case "x" { goal G1 "y" { by R1; }
  evidence R1 "Workshop" kind(record) { description = "minutes"; date = "2024-02-29"; participant = "A"; participant = "B"; }
}"#;
        let o = parse(text);
        assert!(o.diagnostics.is_empty(), "{:?}", o.diagnostics);
        match &o.case.unwrap().evidence("R1").unwrap().payload {
            EvidencePayload::Record(r) => assert_eq!(r.participants, ["A", "B"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicates_are_reported() {
        let text = r#"case "x" { goal G1 "y" { claim C2 "a" { by E1; by E1; } claim C2 "b" { by E1; } }
  evidence E1 "t" kind(document) { uri = "a"; }
  evidence E1 "t" kind(document) { uri = "b"; }
  waive FC-PD-01 "r"; waive FC-PD-01 "r";
}"#;
        let o = parse(text);
        assert_eq!(codes(&o), ["P-011", "P-006", "P-007", "P-008"]);
    }

    #[test]
    fn trailing_content_and_missing_goal() {
        assert_eq!(codes(&parse(r#"case "x" { } extra"#)), ["P-009", "P-005"]);
    }

    #[test]
    fn goal_without_block_is_syntax_ok() {
        let o = parse("case \"x\" {\n  goal G1 \"y\";\n}\n");
        assert!(o.diagnostics.is_empty());
        assert!(o.case.unwrap().root().unwrap().is_leaf());
    }
}
