//! Analysis pipeline and report rendering.
//!
//! [`run_analysis`] drives the policy engine over a facts snapshot and
//! aggregates per-policy metrics into a [`ReportDocument`];
//! [`run_per_callsite`] produces the per-callsite disclosure table. Both
//! documents render to CSV, JSON and Markdown with identical numbers, and
//! rendering is deterministic byte for byte.

use std::collections::BTreeMap;
use std::rc::Rc;

use thiserror::Error;

use cfi_core::facts::{Callsite, CallsiteKind, GadgetAnnotations, ProgramFacts};
use cfi_core::metrics::{
    self, BaselineKind, Decimal2, Distribution, MetricsError, NormalizedAggregates,
    PolicyAggregates, Ranking,
};
use cfi_core::policy::{EngineOptions, Evaluator, PolicyError, PolicyId, TargetKey};

/// Which callsites the run analyzes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Virtual,
    All,
}

impl Scope {
    pub fn label(self) -> &'static str {
        match self {
            Scope::Virtual => "virtual",
            Scope::All => "all",
        }
    }
}

/// Baseline selection. `Auto` mirrors the two-baseline table layout:
/// all functions for policies (1)-(4), virtual functions for (5)-(8).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineChoice {
    AllFunctions,
    VirtualFunctions,
    Auto,
}

impl BaselineChoice {
    fn kind_for(self, policy: PolicyId) -> BaselineKind {
        match self {
            BaselineChoice::AllFunctions => BaselineKind::AllFunctions,
            BaselineChoice::VirtualFunctions => BaselineKind::VirtualFunctions,
            BaselineChoice::Auto => {
                if policy.applies_to_all_indirect() || policy == PolicyId::StrictSrcTypes {
                    BaselineKind::AllFunctions
                } else {
                    BaselineKind::VirtualFunctions
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Policy(#[from] PolicyError),
    #[error("{0}")]
    Metrics(#[from] MetricsError),
}

pub struct AnalysisRequest<'a> {
    pub facts: &'a ProgramFacts,
    pub policies: Vec<PolicyId>,
    pub scope: Scope,
    pub baseline: BaselineChoice,
    pub gadgets: Option<&'a GadgetAnnotations>,
    pub with_rtr: bool,
    pub options: EngineOptions,
}

/// Five-number summary of a distribution as the raw tables print it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistStats {
    pub n: usize,
    pub min: Option<u64>,
    pub p90: Option<u64>,
    pub max: Option<u64>,
    pub median: Option<u64>,
    pub avg: Option<u64>,
}

impl DistStats {
    fn of(d: &Distribution) -> Self {
        DistStats {
            n: d.n(),
            min: d.min(),
            p90: d.p90(),
            max: d.max(),
            median: d.median(),
            avg: d.average_rounded(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RtrStats {
    pub total: u64,
    pub stats: DistStats,
}

#[derive(Debug, Clone)]
pub struct PolicyReport {
    pub policy: PolicyId,
    pub ctr_total: u64,
    pub stats: DistStats,
    pub baseline_kind: BaselineKind,
    pub baseline: u64,
    pub normalized: Option<NormalizedAggregates>,
    /// 1-based position in the ranking, when a ranking was computed.
    pub rank: Option<usize>,
    pub rtr: Option<RtrStats>,
    pub fcga: Option<u64>,
    pub bcga: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ReportDocument {
    pub scope: Scope,
    pub callsites_analyzed: usize,
    pub policies: Vec<PolicyReport>,
    pub ranking: Option<Ranking>,
}

fn baseline_count(facts: &ProgramFacts, kind: BaselineKind) -> u64 {
    facts
        .functions
        .values()
        .filter(|f| !f.is_pure_virtual)
        .filter(|f| match kind {
            BaselineKind::AllFunctions => true,
            BaselineKind::VirtualFunctions => f.is_virtual,
        })
        .count() as u64
}

/// Shared per-key member data: the target list plus the counts the
/// gadget metrics need.
struct KeyData {
    members: Vec<u32>,
    fwd_gadgets: u64,
    return_sites: u64,
}

/// Run the selected policies over the scoped callsites and aggregate.
pub fn run_analysis(req: &AnalysisRequest) -> Result<ReportDocument, AnalysisError> {
    let evaluator = Evaluator::new(req.facts, req.options);
    let scoped: Vec<&Callsite> = req
        .facts
        .callsites
        .values()
        .filter(|cs| req.scope == Scope::All || cs.kind == CallsiteKind::VirtualDispatch)
        .collect();

    let has_return: Vec<bool> = (0..evaluator.function_count() as u32)
        .map(|n| evaluator.facts().functions[evaluator.function_id(n)].has_return)
        .collect();
    let fwd_flag: Vec<bool> = (0..evaluator.function_count() as u32)
        .map(|n| {
            req.gadgets
                .map(|g| g.get(evaluator.function_id(n)).has_forward_gadget)
                .unwrap_or(false)
        })
        .collect();

    let mut reports = Vec::new();
    for &policy in &req.policies {
        let mut memo: BTreeMap<TargetKey, Rc<KeyData>> = BTreeMap::new();
        let mut sizes: Vec<u64> = Vec::with_capacity(scoped.len());
        let mut fcga: u64 = 0;
        let mut bcga: u64 = 0;
        // Per-function membership multiplicities for RTR.
        let mut key_multiplicity: BTreeMap<TargetKey, u64> = BTreeMap::new();

        for cs in &scoped {
            let key = evaluator.target_key(policy, cs)?;
            let data = memo.entry(key).or_insert_with(|| {
                let members = evaluator.members_for_key(key).into_owned();
                let fwd_gadgets = members.iter().filter(|&&m| fwd_flag[m as usize]).count() as u64;
                let return_sites = members.iter().filter(|&&m| has_return[m as usize]).count() as u64;
                Rc::new(KeyData {
                    members,
                    fwd_gadgets,
                    return_sites,
                })
            });
            sizes.push(data.members.len() as u64);
            fcga += data.fwd_gadgets;
            if let (Some(g), Some(encl)) = (req.gadgets, &cs.enclosing_function) {
                if g.get(encl).has_return_gadget {
                    bcga += data.return_sites;
                }
            }
            *key_multiplicity.entry(key).or_insert(0) += 1;
        }

        let summary = metrics::ctr_from_sizes(sizes);
        let baseline_kind = req.baseline.kind_for(policy);
        let baseline = baseline_count(req.facts, baseline_kind);
        let normalized = metrics::normalized_aggregates(&summary.distribution, baseline)?;

        let rtr = if req.with_rtr {
            let mut indirect = vec![0u64; evaluator.function_count()];
            for (key, mult) in &key_multiplicity {
                for &m in &memo[key].members {
                    indirect[m as usize] += mult;
                }
            }
            let values: Vec<u64> = (0..evaluator.function_count() as u32)
                .filter(|&n| has_return[n as usize])
                .map(|n| {
                    indirect[n as usize]
                        + evaluator.facts().functions[evaluator.function_id(n)].direct_call_count
                })
                .collect();
            let dist = Distribution::new(values);
            Some(RtrStats {
                total: dist.sum() as u64,
                stats: DistStats::of(&dist),
            })
        } else {
            None
        };

        reports.push(PolicyReport {
            policy,
            ctr_total: summary.total as u64,
            stats: DistStats::of(&summary.distribution),
            baseline_kind,
            baseline,
            normalized,
            rank: None,
            rtr,
            fcga: req.gadgets.map(|_| fcga),
            bcga: req.gadgets.map(|_| bcga),
        });
    }

    // Rank whenever every selected policy produced aggregates.
    let aggregates: Vec<PolicyAggregates> = reports
        .iter()
        .filter_map(|r| {
            r.normalized.map(|n| PolicyAggregates {
                policy: r.policy,
                avg: n.avg,
                sd: n.sd,
                p90: n.p90,
            })
        })
        .collect();
    let ranking = if aggregates.len() == reports.len() && !reports.is_empty() {
        let ranking = metrics::rank(&aggregates);
        for report in reports.iter_mut() {
            report.rank = ranking
                .order
                .iter()
                .position(|a| a.policy == report.policy)
                .map(|p| p + 1);
        }
        Some(ranking)
    } else {
        None
    };

    Ok(ReportDocument {
        scope: req.scope,
        callsites_analyzed: scoped.len(),
        policies: reports,
        ranking,
    })
}

// --- per-callsite disclosure ---------------------------------------------

#[derive(Debug, Clone)]
pub struct TargetRow {
    pub policy: PolicyId,
    pub function: String,
    pub name: String,
    pub location: String,
}

#[derive(Debug, Clone)]
pub struct CallsiteRow {
    pub id: String,
    pub location: String,
    pub arg_count: usize,
    pub sizes: Vec<u64>,
    pub targets: Vec<TargetRow>,
}

#[derive(Debug, Clone)]
pub struct PerCallsiteDocument {
    pub policies: Vec<PolicyId>,
    pub expanded: bool,
    pub rows: Vec<CallsiteRow>,
}

/// One row per scoped callsite with its per-policy set size; with
/// `expand`, one detail row per legitimate target.
pub fn run_per_callsite(
    req: &AnalysisRequest,
    expand: bool,
) -> Result<PerCallsiteDocument, AnalysisError> {
    let evaluator = Evaluator::new(req.facts, req.options);
    let scoped: Vec<&Callsite> = req
        .facts
        .callsites
        .values()
        .filter(|cs| req.scope == Scope::All || cs.kind == CallsiteKind::VirtualDispatch)
        .collect();

    let mut rows = Vec::with_capacity(scoped.len());
    for cs in scoped {
        let mut sizes = Vec::with_capacity(req.policies.len());
        let mut targets = Vec::new();
        for &policy in &req.policies {
            let members = evaluator.eval_members(policy, cs)?;
            sizes.push(members.len() as u64);
            if expand {
                for &m in members.iter() {
                    let id = evaluator.function_id(m);
                    let f = &req.facts.functions[id];
                    targets.push(TargetRow {
                        policy,
                        function: id.to_string(),
                        name: f.name.clone(),
                        location: f.source_loc.to_string(),
                    });
                }
            }
        }
        rows.push(CallsiteRow {
            id: cs.id.to_string(),
            location: cs.source_loc.to_string(),
            arg_count: cs.args.len(),
            sizes,
            targets,
        });
    }
    Ok(PerCallsiteDocument {
        policies: req.policies.clone(),
        expanded: expand,
        rows,
    })
}

// --- rendering helpers -----------------------------------------------------

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn json_opt_u64(v: Option<u64>) -> serde_json::Value {
    match v {
        Some(x) => serde_json::json!(x),
        None => serde_json::Value::Null,
    }
}

fn md_cell_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".to_string())
}

/// Label + accessor pairs driving the tabular renderers.
type StatRow = (&'static str, fn(&DistStats) -> Option<u64>);
type NormRow = (&'static str, fn(&NormalizedAggregates) -> Decimal2);

// --- analyze renderers -----------------------------------------------------

pub fn render_report_csv(doc: &ReportDocument) -> String {
    let mut out = String::new();
    out.push_str(
        "policy,number,rank,callsites,ctr_total,min,p90,max,median,avg,\
         baseline_kind,baseline,norm_avg,norm_sd,norm_p90,rtr_total,fcga,bcga\n",
    );
    for p in &doc.policies {
        let norm = |f: fn(&NormalizedAggregates) -> Decimal2| {
            p.normalized.map(|n| f(&n).to_string()).unwrap_or_default()
        };
        let row = [
            csv_field(p.policy.label()),
            p.policy.number().to_string(),
            p.rank.map(|r| r.to_string()).unwrap_or_default(),
            p.stats.n.to_string(),
            p.ctr_total.to_string(),
            opt_u64(p.stats.min),
            opt_u64(p.stats.p90),
            opt_u64(p.stats.max),
            opt_u64(p.stats.median),
            opt_u64(p.stats.avg),
            p.baseline_kind.label().to_string(),
            p.baseline.to_string(),
            norm(|n| n.avg),
            norm(|n| n.sd),
            norm(|n| n.p90),
            p.rtr.as_ref().map(|r| r.total.to_string()).unwrap_or_default(),
            p.fcga.map(|v| v.to_string()).unwrap_or_default(),
            p.bcga.map(|v| v.to_string()).unwrap_or_default(),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn render_report_json(doc: &ReportDocument) -> String {
    let policies: Vec<serde_json::Value> = doc
        .policies
        .iter()
        .map(|p| {
            serde_json::json!({
                "policy": p.policy.slug(),
                "label": p.policy.label(),
                "number": p.policy.number(),
                "rank": p.rank,
                "ctr_total": p.ctr_total,
                "distribution": {
                    "n": p.stats.n,
                    "min": json_opt_u64(p.stats.min),
                    "p90": json_opt_u64(p.stats.p90),
                    "max": json_opt_u64(p.stats.max),
                    "median": json_opt_u64(p.stats.median),
                    "avg": json_opt_u64(p.stats.avg),
                },
                "baseline": { "kind": p.baseline_kind.label(), "count": p.baseline },
                "normalized": p.normalized.map(|n| serde_json::json!({
                    "avg": n.avg.to_string(),
                    "sd": n.sd.to_string(),
                    "p90": n.p90.to_string(),
                })),
                "rtr": p.rtr.as_ref().map(|r| serde_json::json!({
                    "total": r.total,
                    "n": r.stats.n,
                    "min": json_opt_u64(r.stats.min),
                    "p90": json_opt_u64(r.stats.p90),
                    "max": json_opt_u64(r.stats.max),
                    "median": json_opt_u64(r.stats.median),
                    "avg": json_opt_u64(r.stats.avg),
                })),
                "fcga": p.fcga,
                "bcga": p.bcga,
            })
        })
        .collect();
    let ranking = doc.ranking.as_ref().map(ranking_json);
    let value = serde_json::json!({
        "scope": doc.scope.label(),
        "callsites_analyzed": doc.callsites_analyzed,
        "policies": policies,
        "ranking": ranking,
    });
    let mut s = serde_json::to_string_pretty(&value).expect("report json");
    s.push('\n');
    s
}

fn ranking_json(r: &Ranking) -> serde_json::Value {
    serde_json::json!({
        "order": r.order.iter().map(|a| a.policy.slug()).collect::<Vec<_>>(),
        "trace": r.trace,
    })
}

pub fn render_report_md(doc: &ReportDocument) -> String {
    let mut out = String::new();
    out.push_str("# Calltarget reduction report\n\n");
    out.push_str(&format!(
        "Scope: {} callsites ({} analyzed)\n\n",
        doc.scope.label(),
        doc.callsites_analyzed
    ));

    let header: String = doc
        .policies
        .iter()
        .map(|p| format!("({}) {}", p.policy.number(), p.policy.label()))
        .collect::<Vec<_>>()
        .join(" | ");
    let sep = vec!["---"; doc.policies.len() + 1].join(" | ");

    out.push_str("## Targets per callsite\n\n");
    out.push_str(&format!("| Value | {header} |\n| {sep} |\n"));
    let rows: [StatRow; 5] = [
        ("Min", |s| s.min),
        ("90p", |s| s.p90),
        ("Max", |s| s.max),
        ("Med", |s| s.median),
        ("Avg", |s| s.avg),
    ];
    for (label, get) in rows {
        let cells: Vec<String> = doc
            .policies
            .iter()
            .map(|p| md_cell_u64(get(&p.stats)))
            .collect();
        out.push_str(&format!("| {label} | {} |\n", cells.join(" | ")));
    }
    let totals: Vec<String> = doc.policies.iter().map(|p| p.ctr_total.to_string()).collect();
    out.push_str(&format!("| CTR total | {} |\n\n", totals.join(" | ")));

    out.push_str("## Normalized (% of baseline)\n\n");
    out.push_str(&format!("| Value | {header} |\n| {sep} |\n"));
    let nrows: [NormRow; 3] = [
        ("Avg", |n| n.avg),
        ("SD", |n| n.sd),
        ("90p", |n| n.p90),
    ];
    for (label, get) in nrows {
        let cells: Vec<String> = doc
            .policies
            .iter()
            .map(|p| {
                p.normalized
                    .map(|n| get(&n).to_string())
                    .unwrap_or_else(|| "-".to_string())
            })
            .collect();
        out.push_str(&format!("| {label} | {} |\n", cells.join(" | ")));
    }
    let baselines: Vec<String> = doc
        .policies
        .iter()
        .map(|p| format!("{} ({})", p.baseline, p.baseline_kind.label()))
        .collect();
    out.push_str(&format!("| Baseline | {} |\n\n", baselines.join(" | ")));

    if doc.policies.iter().any(|p| p.rtr.is_some()) {
        out.push_str("## Return targets per return site\n\n");
        out.push_str(&format!("| Value | {header} |\n| {sep} |\n"));
        let rrows: [StatRow; 5] = [
            ("Min", |s| s.min),
            ("90p", |s| s.p90),
            ("Max", |s| s.max),
            ("Med", |s| s.median),
            ("Avg", |s| s.avg),
        ];
        for (label, get) in rrows {
            let cells: Vec<String> = doc
                .policies
                .iter()
                .map(|p| {
                    p.rtr
                        .as_ref()
                        .map(|r| md_cell_u64(get(&r.stats)))
                        .unwrap_or_else(|| "-".to_string())
                })
                .collect();
            out.push_str(&format!("| {label} | {} |\n", cells.join(" | ")));
        }
        let totals: Vec<String> = doc
            .policies
            .iter()
            .map(|p| {
                p.rtr
                    .as_ref()
                    .map(|r| r.total.to_string())
                    .unwrap_or_else(|| "-".to_string())
            })
            .collect();
        out.push_str(&format!("| RTR total | {} |\n\n", totals.join(" | ")));
    }

    if doc.policies.iter().any(|p| p.fcga.is_some()) {
        out.push_str("## Gadget availability\n\n");
        out.push_str(&format!("| Value | {header} |\n| {sep} |\n"));
        let fcga: Vec<String> = doc
            .policies
            .iter()
            .map(|p| p.fcga.map(|v| v.to_string()).unwrap_or_else(|| "-".to_string()))
            .collect();
        let bcga: Vec<String> = doc
            .policies
            .iter()
            .map(|p| p.bcga.map(|v| v.to_string()).unwrap_or_else(|| "-".to_string()))
            .collect();
        out.push_str(&format!("| fCGA | {} |\n", fcga.join(" | ")));
        out.push_str(&format!("| bCGA | {} |\n\n", bcga.join(" | ")));
    }

    if let Some(ranking) = &doc.ranking {
        out.push_str(&render_ranking_md_body(ranking));
    }
    out
}

// --- per-callsite renderers ------------------------------------------------

pub fn render_per_callsite_csv(doc: &PerCallsiteDocument) -> String {
    let mut out = String::new();
    if doc.expanded {
        out.push_str("callsite,location,policy,function,name,target_location\n");
        for row in &doc.rows {
            for t in &row.targets {
                let fields = [
                    csv_field(&row.id),
                    csv_field(&row.location),
                    csv_field(t.policy.slug()),
                    csv_field(&t.function),
                    csv_field(&t.name),
                    csv_field(&t.location),
                ];
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        return out;
    }
    out.push_str("callsite,location,args");
    for p in &doc.policies {
        out.push(',');
        out.push_str(p.slug());
    }
    out.push('\n');
    for row in &doc.rows {
        let mut fields = vec![
            csv_field(&row.id),
            csv_field(&row.location),
            row.arg_count.to_string(),
        ];
        fields.extend(row.sizes.iter().map(|s| s.to_string()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn render_per_callsite_json(doc: &PerCallsiteDocument) -> String {
    let rows: Vec<serde_json::Value> = doc
        .rows
        .iter()
        .map(|row| {
            let sizes: serde_json::Map<String, serde_json::Value> = doc
                .policies
                .iter()
                .zip(&row.sizes)
                .map(|(p, s)| (p.slug().to_string(), serde_json::json!(s)))
                .collect();
            let mut value = serde_json::json!({
                "callsite": row.id,
                "location": row.location,
                "args": row.arg_count,
                "targets": sizes,
            });
            if doc.expanded {
                value["expanded"] = serde_json::json!(row
                    .targets
                    .iter()
                    .map(|t| serde_json::json!({
                        "policy": t.policy.slug(),
                        "function": t.function,
                        "name": t.name,
                        "location": t.location,
                    }))
                    .collect::<Vec<_>>());
            }
            value
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "callsites": rows }))
        .expect("per-callsite json");
    s.push('\n');
    s
}

pub fn render_per_callsite_md(doc: &PerCallsiteDocument) -> String {
    let mut out = String::new();
    out.push_str("# Per-callsite legitimate targets\n\n");
    let header: String = doc
        .policies
        .iter()
        .map(|p| format!("({})", p.number()))
        .collect::<Vec<_>>()
        .join(" | ");
    let sep = vec!["---"; doc.policies.len() + 3].join(" | ");
    out.push_str(&format!("| Callsite | Location | Args | {header} |\n| {sep} |\n"));
    for row in &doc.rows {
        let sizes: Vec<String> = row.sizes.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            row.id,
            row.location,
            row.arg_count,
            sizes.join(" | ")
        ));
    }
    if doc.expanded {
        out.push('\n');
        for row in &doc.rows {
            if row.targets.is_empty() {
                continue;
            }
            out.push_str(&format!("## {}\n\n", row.id));
            for t in &row.targets {
                out.push_str(&format!(
                    "- [{}] {} `{}` at {}\n",
                    t.policy.slug(),
                    t.function,
                    t.name,
                    t.location
                ));
            }
            out.push('\n');
        }
    }
    out
}

// --- ranking renderers -------------------------------------------------------

pub fn render_ranking_csv(r: &Ranking) -> String {
    let mut out = String::new();
    out.push_str("rank,policy,avg,sd,p90\n");
    for (i, a) in r.order.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            csv_field(a.policy.slug()),
            a.avg,
            a.sd,
            a.p90
        ));
    }
    out
}

pub fn render_ranking_json(r: &Ranking) -> String {
    let order: Vec<serde_json::Value> = r
        .order
        .iter()
        .enumerate()
        .map(|(i, a)| {
            serde_json::json!({
                "rank": i + 1,
                "policy": a.policy.slug(),
                "avg": a.avg.to_string(),
                "sd": a.sd.to_string(),
                "p90": a.p90.to_string(),
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&serde_json::json!({
        "order": order,
        "trace": r.trace,
    }))
    .expect("ranking json");
    s.push('\n');
    s
}

fn render_ranking_md_body(r: &Ranking) -> String {
    let mut out = String::new();
    out.push_str("## Ranking (best first)\n\n");
    for (i, a) in r.order.iter().enumerate() {
        out.push_str(&format!(
            "{}. {} (avg {}, SD {}, 90p {})\n",
            i + 1,
            a.policy.label(),
            a.avg,
            a.sd,
            a.p90
        ));
    }
    if !r.trace.is_empty() {
        out.push_str("\nTie-breaks:\n");
        for t in &r.trace {
            out.push_str(&format!("- {t}\n"));
        }
    }
    out
}

pub fn render_ranking_md(r: &Ranking) -> String {
    format!("# Policy ranking\n\n{}", render_ranking_md_body(r))
}
