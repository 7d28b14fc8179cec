//! Query-log events, search sessions and click-validated refinement labels.
//!
//! A log file holds one event per line with five tab-separated fields:
//!
//! ```text
//! session_id <TAB> Q|C <TAB> seq_id <TAB> content <TAB> 2012-01-05T10:00:00Z
//! ```
//!
//! Lines starting with `#` are comments. Malformed lines are rejected one by
//! one and counted; they never abort a whole file.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventType {
    Query,
    Click,
}

impl EventType {
    pub fn code(self) -> char {
        match self {
            EventType::Query => 'Q',
            EventType::Click => 'C',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEvent {
    pub session_id: String,
    pub event_type: EventType,
    pub seq_id: u64,
    /// Query text for queries, document id for clicks.
    pub content: String,
    pub timestamp: DateTime<Utc>,
}

impl LogEvent {
    pub fn is_query(&self) -> bool {
        self.event_type == EventType::Query
    }

    pub fn is_click(&self) -> bool {
        self.event_type == EventType::Click
    }

    /// Renders the event back into its log-line form (no trailing newline).
    pub fn to_log_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.session_id,
            self.event_type.code(),
            self.seq_id,
            self.content,
            self.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true)
        )
    }
}

/// Why a single log line was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineError {
    #[error("expected 5 tab-separated fields, found {0}")]
    FieldCount(usize),
    #[error("unknown event code {0:?}")]
    UnknownEventCode(String),
    #[error("seq_id must be a positive integer, found {0:?}")]
    BadSeqId(String),
    #[error("unparseable timestamp {0:?}")]
    BadTimestamp(String),
    #[error("empty {0}")]
    EmptyField(&'static str),
}

pub fn parse_log_line(line: &str) -> Result<LogEvent, LineError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(LineError::FieldCount(fields.len()));
    }
    let session_id = fields[0].trim();
    if session_id.is_empty() {
        return Err(LineError::EmptyField("session id"));
    }
    let event_type = match fields[1].trim() {
        "Q" => EventType::Query,
        "C" => EventType::Click,
        other => return Err(LineError::UnknownEventCode(other.to_string())),
    };
    let seq_id = match fields[2].trim().parse::<u64>() {
        Ok(n) if n > 0 => n,
        _ => return Err(LineError::BadSeqId(fields[2].to_string())),
    };
    let content = fields[3].trim();
    if content.is_empty() {
        return Err(LineError::EmptyField("content"));
    }
    let timestamp = DateTime::parse_from_rfc3339(fields[4].trim())
        .map_err(|_| LineError::BadTimestamp(fields[4].to_string()))?
        .with_timezone(&Utc);
    Ok(LogEvent {
        session_id: session_id.to_string(),
        event_type,
        seq_id,
        content: content.to_string(),
        timestamp,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: LineError,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub events: Vec<LogEvent>,
    pub rejected: Vec<RejectedLine>,
}

/// Reads a whole log, skipping comments and blank lines and collecting rejects.
pub fn read_log<R: BufRead>(reader: R) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_log_line(trimmed) {
            Ok(ev) => out.events.push(ev),
            Err(reason) => out.rejected.push(RejectedLine {
                line: idx + 1,
                reason,
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSession {
    pub session_id: String,
    /// Sorted by `seq_id`.
    pub events: Vec<LogEvent>,
    /// Set when a later `seq_id` carries an earlier timestamp.
    pub non_monotone_timestamps: bool,
}

impl SearchSession {
    pub fn query_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_query()).count()
    }

    pub fn click_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_click()).count()
    }

    pub fn start_time(&self) -> Option<DateTime<Utc>> {
        self.events.first().map(|e| e.timestamp)
    }

    /// One impression per query event, in session order.
    pub fn impressions(&self) -> Vec<QueryImpression> {
        let mut out = Vec::new();
        let mut clicks: Vec<&str> = Vec::new();
        let mut queries: Vec<&str> = Vec::new();
        for (idx, ev) in self.events.iter().enumerate() {
            match ev.event_type {
                EventType::Click => clicks.push(&ev.content),
                EventType::Query => {
                    out.push(QueryImpression {
                        session_id: self.session_id.clone(),
                        query_text: ev.content.clone(),
                        position: queries.len() + 1,
                        event_index: idx,
                        seq_id: ev.seq_id,
                        timestamp: ev.timestamp,
                        prior_clicks: clicks.iter().rev().map(|s| s.to_string()).collect(),
                        prior_queries: queries.iter().rev().map(|s| s.to_string()).collect(),
                    });
                    queries.push(&ev.content);
                }
            }
        }
        out
    }
}

/// Groups events by session and orders each session by `seq_id`.
///
/// Sessions come back sorted by session id, so the output does not depend on
/// the arrival order of events.
pub fn assemble_sessions<I>(events: I) -> Result<Vec<SearchSession>>
where
    I: IntoIterator<Item = LogEvent>,
{
    let mut grouped: BTreeMap<String, Vec<LogEvent>> = BTreeMap::new();
    for ev in events {
        grouped.entry(ev.session_id.clone()).or_default().push(ev);
    }
    let mut sessions = Vec::with_capacity(grouped.len());
    for (session_id, mut events) in grouped {
        events.sort_by_key(|e| e.seq_id);
        if let Some(w) = events.windows(2).find(|w| w[0].seq_id == w[1].seq_id) {
            return Err(Error::DuplicateEvent {
                session_id,
                seq_id: w[0].seq_id,
            });
        }
        let non_monotone_timestamps = events.windows(2).any(|w| w[1].timestamp < w[0].timestamp);
        sessions.push(SearchSession {
            session_id,
            events,
            non_monotone_timestamps,
        });
    }
    Ok(sessions)
}

/// Drops sessions made of a single event.
pub fn preprocess_sessions(sessions: Vec<SearchSession>) -> Vec<SearchSession> {
    sessions
        .into_iter()
        .filter(|s| s.events.len() != 1)
        .collect()
}

/// A query as seen at submission time, with the session history before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryImpression {
    pub session_id: String,
    pub query_text: String,
    /// 1-based order of this query among the session's queries.
    pub position: usize,
    /// Index of the query event inside `SearchSession::events`.
    pub event_index: usize,
    pub seq_id: u64,
    pub timestamp: DateTime<Utc>,
    /// Clicked document ids before this query, most recent first.
    pub prior_clicks: Vec<String>,
    /// Earlier query texts, most recent first.
    pub prior_queries: Vec<String>,
}

impl QueryImpression {
    /// Stable identifier `session_id#position`.
    pub fn id(&self) -> String {
        format!("{}#{}", self.session_id, self.position)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImpression {
    pub impression: QueryImpression,
    pub suggestions: Vec<String>,
    pub labels: Vec<bool>,
}

impl LabeledImpression {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardReason {
    /// The impression is the session's last query.
    NoRefinement,
    /// The refinement was never followed by a click before the next query.
    NoClickAfterRefinement,
    /// None of the suggestions matches the refinement.
    NoPositive,
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscardReason::NoRefinement => "no refinement",
            DiscardReason::NoClickAfterRefinement => "refinement not followed by a click",
            DiscardReason::NoPositive => "no suggestion matches the refinement",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelOutcome {
    Labeled(LabeledImpression),
    Discard(DiscardReason),
}

/// The next query after `impression`, provided a click follows it before the
/// query after that (or the end of the session).
pub fn validated_refinement<'s>(
    session: &'s SearchSession,
    impression: &QueryImpression,
) -> Result<&'s str, DiscardReason> {
    let rest = &session.events[impression.event_index + 1..];
    let next_idx = rest
        .iter()
        .position(|e| e.is_query())
        .ok_or(DiscardReason::NoRefinement)?;
    let clicked = rest[next_idx + 1..]
        .iter()
        .take_while(|e| !e.is_query())
        .any(|e| e.is_click());
    if !clicked {
        return Err(DiscardReason::NoClickAfterRefinement);
    }
    Ok(&rest[next_idx].content)
}

/// Click-validated refinement labelling.
///
/// A suggestion is positive iff it equals (after [`normalize_query`]) the next
/// query in the session and that query was followed by at least one click
/// before any further query. Impressions without a positive are discarded.
pub fn label_suggestions(
    session: &SearchSession,
    impression: &QueryImpression,
    suggestions: &[String],
) -> LabelOutcome {
    let refinement = match validated_refinement(session, impression) {
        Ok(r) => normalize_query(r),
        Err(reason) => return LabelOutcome::Discard(reason),
    };
    let labels: Vec<bool> = suggestions
        .iter()
        .map(|s| normalize_query(s) == refinement)
        .collect();
    if !labels.iter().any(|&l| l) {
        return LabelOutcome::Discard(DiscardReason::NoPositive);
    }
    LabelOutcome::Labeled(LabeledImpression {
        impression: impression.clone(),
        suggestions: suggestions.to_vec(),
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogStats {
    pub sessions: usize,
    pub events: usize,
    pub queries: usize,
    pub clicks: usize,
    pub events_per_session: f64,
    pub queries_per_session: f64,
    pub clicks_per_session: f64,
}

pub fn compute_log_stats(sessions: &[SearchSession]) -> LogStats {
    let n = sessions.len();
    let events: usize = sessions.iter().map(|s| s.events.len()).sum();
    let queries: usize = sessions.iter().map(|s| s.query_count()).sum();
    let clicks: usize = sessions.iter().map(|s| s.click_count()).sum();
    let ratio = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
    LogStats {
        sessions: n,
        events,
        queries,
        clicks,
        events_per_session: ratio(events),
        queries_per_session: ratio(queries),
        clicks_per_session: ratio(clicks),
    }
}

impl fmt::Display for LogStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<20}{:>12}", "Item", "Value")?;
        writeln!(f, "{:<20}{:>12}", "#search sessions", self.sessions)?;
        writeln!(f, "{:<20}{:>12}", "#events", self.events)?;
        writeln!(
            f,
            "{:<20}{:>12.2}",
            "#events/session", self.events_per_session
        )?;
        writeln!(f, "{:<20}{:>12}", "#queries", self.queries)?;
        writeln!(
            f,
            "{:<20}{:>12.2}",
            "#query/session", self.queries_per_session
        )?;
        writeln!(f, "{:<20}{:>12}", "#clicked url", self.clicks)?;
        write!(
            f,
            "{:<20}{:>12.2}",
            "#clicks/session", self.clicks_per_session
        )
    }
}

/// Lowercases, trims and collapses internal whitespace. No stemming.
pub fn normalize_query(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(sid: &str, t: EventType, seq: u64, content: &str, secs: i64) -> LogEvent {
        LogEvent {
            session_id: sid.into(),
            event_type: t,
            seq_id: seq,
            content: content.into(),
            timestamp: DateTime::from_timestamp(1_325_757_600 + secs, 0).unwrap(),
        }
    }

    fn session(events: Vec<LogEvent>) -> SearchSession {
        assemble_sessions(events).unwrap().remove(0)
    }

    use EventType::{Click as C, Query as Q};

    #[test]
    fn parses_query_and_click_lines() {
        let q = parse_log_line("s1\tQ\t1\tlecture notes\t2012-01-05T10:00:00Z").unwrap();
        assert_eq!(q.event_type, Q);
        assert_eq!(q.seq_id, 1);
        assert_eq!(q.content, "lecture notes");
        assert_eq!(
            q.to_log_line(),
            "s1\tQ\t1\tlecture notes\t2012-01-05T10:00:00Z"
        );

        let c = parse_log_line("s1\tC\t2\t/sociology/notes.pdf\t2012-01-05T10:00:41Z").unwrap();
        assert_eq!(c.event_type, C);
        assert_eq!(c.seq_id, 2);
        assert_eq!(c.content, "/sociology/notes.pdf");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert_eq!(
            parse_log_line("s1\tX\t3\tfoo\t2012-01-05T10:01:00Z"),
            Err(LineError::UnknownEventCode("X".into()))
        );
        assert_eq!(
            parse_log_line("s1\tQ\t3\tfoo"),
            Err(LineError::FieldCount(4))
        );
        assert!(matches!(
            parse_log_line("s1\tQ\t0\tfoo\t2012-01-05T10:01:00Z"),
            Err(LineError::BadSeqId(_))
        ));
        assert!(matches!(
            parse_log_line("s1\tQ\t-2\tfoo\t2012-01-05T10:01:00Z"),
            Err(LineError::BadSeqId(_))
        ));
        assert!(matches!(
            parse_log_line("s1\tQ\t3\tfoo\tyesterday"),
            Err(LineError::BadTimestamp(_))
        ));
        assert_eq!(
            parse_log_line("s1\tQ\t3\t \t2012-01-05T10:01:00Z"),
            Err(LineError::EmptyField("content"))
        );
    }

    #[test]
    fn read_log_counts_rejects_and_skips_comments() {
        let text = "# header\n\
                    s1\tQ\t1\ta\t2012-01-05T10:00:00Z\n\
                    \n\
                    s1\tX\t2\tb\t2012-01-05T10:00:00Z\n\
                    s1\tC\t3\td1\t2012-01-05T10:00:09Z\n";
        let parsed = read_log(text.as_bytes()).unwrap();
        assert_eq!(parsed.events.len(), 2);
        assert_eq!(parsed.rejected.len(), 1);
        assert_eq!(parsed.rejected[0].line, 4);
    }

    #[test]
    fn assembles_and_sorts() {
        let sessions = assemble_sessions(vec![
            ev("s1", Q, 2, "b", 5),
            ev("s2", Q, 1, "x", 0),
            ev("s1", Q, 1, "a", 0),
        ])
        .unwrap();
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[0].events.len(), 2);
        assert_eq!(sessions[0].events[0].content, "a");
        assert_eq!(sessions[1].events.len(), 1);
        assert!(assemble_sessions(Vec::new()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_seq_is_an_error_naming_the_pair() {
        let err =
            assemble_sessions(vec![ev("s9", Q, 4, "a", 0), ev("s9", C, 4, "d", 1)]).unwrap_err();
        match err {
            Error::DuplicateEvent { session_id, seq_id } => {
                assert_eq!(session_id, "s9");
                assert_eq!(seq_id, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_timestamps_are_flagged_not_dropped() {
        let s = session(vec![ev("s1", Q, 1, "a", 10), ev("s1", C, 2, "d", 5)]);
        assert!(s.non_monotone_timestamps);
        assert_eq!(s.events.len(), 2);
    }

    #[test]
    fn preprocessing_removes_single_event_sessions() {
        let sessions = assemble_sessions(vec![
            ev("a", Q, 1, "x", 0),
            ev("b", Q, 1, "x", 0),
            ev("b", C, 2, "d", 1),
            ev("b", Q, 3, "y", 2),
        ])
        .unwrap();
        let kept = preprocess_sessions(sessions.clone());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].session_id, "b");
        assert_eq!(preprocess_sessions(kept.clone()), kept);
        assert!(preprocess_sessions(vec![sessions[0].clone()]).is_empty());
    }

    #[test]
    fn impressions_carry_history_most_recent_first() {
        let s = session(vec![
            ev("s", Q, 1, "q1", 0),
            ev("s", C, 2, "d1", 1),
            ev("s", C, 3, "d2", 2),
            ev("s", Q, 4, "q2", 3),
            ev("s", Q, 5, "q3", 4),
        ]);
        let imps = s.impressions();
        assert_eq!(imps.len(), 3);
        assert_eq!(imps[0].position, 1);
        assert!(imps[0].prior_clicks.is_empty());
        assert_eq!(imps[1].prior_clicks, vec!["d2", "d1"]);
        assert_eq!(imps[2].prior_queries, vec!["q2", "q1"]);
        assert_eq!(imps[2].id(), "s#3");
    }

    fn sugg(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn labels_click_validated_refinement() {
        let s = session(vec![
            ev("s", Q, 1, "campus", 0),
            ev("s", Q, 2, "Campus  Map", 5),
            ev("s", C, 3, "/map.pdf", 9),
        ]);
        let imp = &s.impressions()[0];
        let out = label_suggestions(&s, imp, &sugg(&["campus parking", "campus map", "library"]));
        match out {
            LabelOutcome::Labeled(l) => assert_eq!(l.labels, vec![false, true, false]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn refinement_without_click_is_discarded() {
        let s = session(vec![
            ev("s", Q, 1, "campus", 0),
            ev("s", Q, 2, "campus map", 5),
        ]);
        let imp = &s.impressions()[0];
        assert_eq!(
            label_suggestions(&s, imp, &sugg(&["campus map"])),
            LabelOutcome::Discard(DiscardReason::NoClickAfterRefinement)
        );
    }

    #[test]
    fn click_after_a_later_query_does_not_validate() {
        let s = session(vec![
            ev("s", Q, 1, "campus", 0),
            ev("s", Q, 2, "campus map", 5),
            ev("s", Q, 3, "library", 6),
            ev("s", C, 4, "/lib", 7),
        ]);
        let imp = &s.impressions()[0];
        assert_eq!(
            label_suggestions(&s, imp, &sugg(&["campus map"])),
            LabelOutcome::Discard(DiscardReason::NoClickAfterRefinement)
        );
    }

    #[test]
    fn unmatched_and_last_queries_are_discarded() {
        let s = session(vec![
            ev("s", Q, 1, "campus", 0),
            ev("s", Q, 2, "campus map", 5),
            ev("s", C, 3, "/map.pdf", 9),
        ]);
        let imps = s.impressions();
        assert_eq!(
            label_suggestions(&s, &imps[0], &sugg(&["library"])),
            LabelOutcome::Discard(DiscardReason::NoPositive)
        );
        assert_eq!(
            label_suggestions(&s, &imps[1], &sugg(&["library"])),
            LabelOutcome::Discard(DiscardReason::NoRefinement)
        );
    }

    #[test]
    fn duplicate_matches_are_all_positive() {
        let s = session(vec![
            ev("s", Q, 1, "a", 0),
            ev("s", Q, 2, "a b", 1),
            ev("s", C, 3, "d", 2),
        ]);
        let imp = &s.impressions()[0];
        let LabelOutcome::Labeled(l) = label_suggestions(&s, imp, &sugg(&["a b", "c", "A  B"]))
        else {
            panic!()
        };
        assert_eq!(l.labels, vec![true, false, true]);
        assert_eq!(l.positives(), 2);
    }

    #[test]
    fn stats_hand_count() {
        let sessions = assemble_sessions(vec![
            ev("a", Q, 1, "x", 0),
            ev("a", C, 2, "d", 1),
            ev("a", Q, 3, "y", 2),
            ev("b", Q, 1, "x", 0),
            ev("b", C, 2, "d", 1),
        ])
        .unwrap();
        let st = compute_log_stats(&sessions);
        assert_eq!(
            (st.sessions, st.events, st.queries, st.clicks),
            (2, 5, 3, 2)
        );
        assert_eq!(st.events_per_session, 2.5);
        assert_eq!(st.events, st.queries + st.clicks);
        let empty = compute_log_stats(&[]);
        assert_eq!(empty, LogStats::default());
        let table = st.to_string();
        for label in [
            "#search sessions",
            "#events",
            "#events/session",
            "#queries",
            "#clicked url",
        ] {
            assert!(table.contains(label), "{label}");
        }
    }

    #[test]
    fn normalizes_queries() {
        assert_eq!(normalize_query("  Lecture   Notes "), "lecture notes");
        assert_eq!(normalize_query("WEBMAIL"), "webmail");
        assert_eq!(normalize_query(""), "");
    }
}
