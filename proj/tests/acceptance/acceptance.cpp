// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "protrag/annotation_store.hpp"
#include "protrag/cli.hpp"
#include "protrag/evaluation.hpp"
#include "protrag/filter_model.hpp"
#include "protrag/homology.hpp"
#include "protrag/horizontal_filter.hpp"
#include "protrag/llm_gateway.hpp"
#include "protrag/pipeline.hpp"
#include "protrag/rng.hpp"
#include "protrag/text.hpp"
#include "protrag/vertical_filter.hpp"

using namespace protrag;
using nlohmann::json;

namespace {

// Pinned tolerances.
constexpr double kIgRelTol = 1e-12;
constexpr double kMetricTol = 1e-9;
constexpr double kMinHeldOutAccuracy = 0.95;

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Checker {
public:
    void expect(bool cond, const std::string& what) {
        if (!cond && failures_.size() < 5) failures_.push_back(what);
        if (!cond) ++failed_;
        ++checks_;
    }
    Outcome outcome(const std::string& summary) const {
        if (failed_ == 0) return {true, summary + " (" + std::to_string(checks_) + " checks)"};
        std::string d = std::to_string(failed_) + "/" + std::to_string(checks_) + " checks failed";
        for (const auto& f : failures_) d += "; " + f;
        return {false, d};
    }

private:
    std::size_t checks_ = 0;
    std::size_t failed_ = 0;
    std::vector<std::string> failures_;
};

std::vector<std::string> split_records(const std::string& dat) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(dat);
    std::string line;
    while (std::getline(in, line)) {
        cur += line + "\n";
        if (line == "//") {
            out.push_back(cur);
            cur.clear();
        }
    }
    return out;
}

using Snip = std::pair<std::string, std::string>;

struct ExpectedEntry {
    std::string accession;
    std::vector<std::string> secondary;
    std::string entry_name;
    std::uint32_t length;
    std::vector<std::string> go;
    std::vector<Snip> snippets;
};

const std::string kCaseReaction =
    "Reaction=a very-long-chain 2,3-saturated fatty acyl-CoA + NADP(+) = a very-long-chain (2E)-enoyl-CoA + NADPH "
    "+ H(+); Xref=Rhea:RHEA:14473;";

std::vector<ExpectedEntry> golden_entries() {
    return {
        {"Q55C17",
         {},
         "TECR_DICDI",
         309,
         {"GO:0005789", "GO:0102758", "GO:0030497"},
         {{"FUNCTION",
           "Catalyzes the last of the four reactions of the long-chain fatty acids elongation cycle. Reduces the "
           "trans-2,3-enoyl-CoA intermediate to an acyl-CoA."},
          {"CATALYTIC ACTIVITY", kCaseReaction},
          {"PATHWAY", "Lipid metabolism; fatty acid biosynthesis."},
          {"SUBCELLULAR LOCATION", "Endoplasmic reticulum membrane; Multi-pass membrane protein."},
          {"SIMILARITY", "Belongs to the steroid 5-alpha reductase family."}}},
        {"Q9N5Y2",
         {},
         "TECR_CAEEL",
         301,
         {"GO:0102758"},
         {{"FUNCTION", "Involved in the production of very long-chain fatty acids."},
          {"CATALYTIC ACTIVITY", kCaseReaction},
          {"SUBCELLULAR LOCATION", "Endoplasmic reticulum membrane."},
          {"SIMILARITY", "Belongs to the steroid 5-alpha reductase family."}}},
        {"Q3ZCD7",
         {"Q2KJ11"},
         "TECR_BOVIN",
         308,
         {"GO:0005783"},
         {{"FUNCTION",
           "Involved in both the production of very long-chain fatty acids for sphingolipid synthesis and the "
           "degradation of the sphingosine moiety in sphingolipids (By similarity)."},
          {"CATALYTIC ACTIVITY",
           "Reaction=octadecanoyl-CoA + NADP(+) = (2E)-octadecenoyl-CoA + NADPH + H(+); Xref=Rhea:RHEA:35351; "
           "PhysiologicalDirection=right-to-left;"},
          {"CATALYTIC ACTIVITY",
           "Reaction=(2E)-hexadecenoyl-CoA + NADPH + H(+) = hexadecanoyl-CoA + NADP(+); Xref=Rhea:RHEA:36143; "
           "PhysiologicalDirection=left-to-right;"},
          {"SUBUNIT", "Interacts with ELOVL1 and LASS2."},
          {"PTM", "Glycosylated."}}},
        {"O74923",
         {},
         "GLNA_SCHPO",
         359,
         {"GO:0004356"},
         {{"FUNCTION",
           "Glutamine synthetase that catalyzes the ATP-dependent conversion of glutamate and ammonia to glutamine."},
          {"CATALYTIC ACTIVITY",
           "Reaction=L-glutamate + NH4(+) + ATP = L-glutamine + ADP + phosphate + H(+); Xref=Rhea:RHEA:16169; "
           "EC=6.3.1.2;"},
          {"SUBUNIT", "Homooctamer and homotetramer."},
          {"SUBCELLULAR LOCATION", "Cytoplasm."},
          {"DOMAIN_MOTIF", "DOMAIN 20..102: GS beta-grasp"},
          {"DOMAIN_MOTIF", "DOMAIN 109..359: GS catalytic"}}},
        {"P31749",
         {"B2RAM5", "Q9BWB6"},
         "AKT1_HUMAN",
         480,
         {"GO:0004674", "GO:0005634"},
         {{"FUNCTION",
           "AKT1 is one of 3 closely related serine/threonine-protein kinases which regulate many processes including "
           "metabolism, proliferation, cell survival, growth and angiogenesis."},
          {"CATALYTIC ACTIVITY",
           "Reaction=L-seryl-[protein] + ATP = O-phospho-L-seryl-[protein] + ADP + H(+); Xref=Rhea:RHEA:17989; "
           "EC=2.7.11.1;"},
          {"PTM", "Phosphorylated on Thr-308 and Ser-473."},
          {"DOMAIN_MOTIF", "DOMAIN 5..108: PH"},
          {"DOMAIN_MOTIF", "DOMAIN 150..408: Protein kinase"},
          {"DOMAIN_MOTIF", "MOTIF 470..474: Hydrophobic motif, required for full activation"},
          {"DOMAIN_MOTIF", "REGION 450..480: Disordered"}}},
        {"A0A023GPI8",
         {},
         "LIP1_TEST",
         88,
         {},
         {{"FUNCTION", "Hydrolyzes triglycerides e.g. in adipose tissue."},
          {"MISCELLANEOUS", "Present in approx. 3000 molecules/cell."}}},
    };
}

// 1 ---------------------------------------------------------------------------
Outcome parser_golden() {
    Checker c;
    const auto records = split_records(fixtures::read_file(fixtures::data("swissprot_mini.dat")));
    const auto expected = golden_entries();
    c.expect(records.size() == expected.size(), "record count");
    std::vector<ProteinEntry> parsed;
    for (std::size_t i = 0; i < std::min(records.size(), expected.size()); ++i) {
        const auto e = parse_entry(records[i]);
        parsed.push_back(e);
        const auto& x = expected[i];
        c.expect(e.accession == x.accession, "accession " + x.accession);
        c.expect(e.secondary_accessions == x.secondary, "secondary accessions of " + x.accession);
        c.expect(e.entry_name == x.entry_name, "entry name of " + x.accession);
        c.expect(e.sequence_length == x.length, "length of " + x.accession);
        c.expect(e.go_ids == x.go, "GO ids of " + x.accession);
        std::vector<Snip> got;
        for (const auto& s : e.snippets) {
            got.emplace_back(s.tag.name(), s.value);
            c.expect(s.source_accession == x.accession, "snippet accession of " + x.accession);
        }
        c.expect(got == x.snippets, "snippet list of " + x.accession);
        c.expect(parse_entry(records[i]) == e, "repeat parse of " + x.accession);
    }

    fixtures::TempDir dir;
    const auto built = AnnotationIndex::build(fixtures::data("swissprot_mini.dat"), fixtures::data("go_mini.obo"));
    built.save(dir.path());
    const auto loaded = AnnotationIndex::load(dir.path());
    c.expect(loaded.locations() == built.locations(), "index locations survive save/load");
    for (const auto& e : parsed) {
        c.expect(loaded.lookup(e.accession) == e, "index lookup of " + e.accession + " equals direct parse");
        for (const auto& s : e.secondary_accessions)
            c.expect(loaded.lookup(s) == e, "secondary lookup " + s);
    }
    return c.outcome("6 records match hand-enumerated snippets; index round trip equal");
}

// 2 ---------------------------------------------------------------------------
bool is_self(const HomologHit& h, std::size_t qlen) {
    return h.alignment_length == h.identity_count && h.alignment_length == qlen;
}

Outcome leakage_exclusion() {
    Checker c;
    Rng rng(2024);
    std::size_t self_seen = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t qlen = 20 + rng.below(380);
        std::vector<HomologHit> hits;
        const auto n = rng.below(30);
        std::size_t expected_kept = 0;
        for (std::size_t i = 0; i < n; ++i) {
            HomologHit h;
            h.query_id = "q";
            h.subject_accession = "P" + std::to_string(10000 + i);
            switch (rng.below(5)) {
                case 0:  // exact self hit
                    h.alignment_length = h.identity_count = static_cast<std::uint32_t>(qlen);
                    break;
                case 1:  // full length, one mismatch
                    h.alignment_length = static_cast<std::uint32_t>(qlen);
                    h.identity_count = static_cast<std::uint32_t>(qlen - 1);
                    break;
                case 2:  // identical but partial
                    h.alignment_length = h.identity_count = static_cast<std::uint32_t>(1 + rng.below(qlen - 1));
                    break;
                default:
                    h.alignment_length = static_cast<std::uint32_t>(1 + rng.below(qlen + 50));
                    h.identity_count = static_cast<std::uint32_t>(rng.below(h.alignment_length + 1));
            }
            h.percent_identity = 100.0 * h.identity_count / h.alignment_length;
            h.e_value = rng.uniform();
            h.bitscore = 10 + 100 * rng.uniform();
            if (is_self(h, qlen))
                ++self_seen;
            else
                ++expected_kept;
            hits.push_back(h);
        }
        const auto once = exclude_self_hits(hits, qlen);
        const auto twice = exclude_self_hits(once, qlen);
        c.expect(std::none_of(once.begin(), once.end(), [&](const auto& h) { return is_self(h, qlen); }),
                 "self hit survived (trial " + std::to_string(trial) + ")");
        c.expect(once.size() == expected_kept, "non-self hit dropped (trial " + std::to_string(trial) + ")");
        c.expect(once == twice, "exclusion not idempotent (trial " + std::to_string(trial) + ")");

        RetrievalConfig cfg;
        cfg.top_k = 1000;
        const auto ranked = rank_and_select(hits, cfg, qlen);
        c.expect(std::none_of(ranked.begin(), ranked.end(), [&](const auto& h) { return is_self(h, qlen); }),
                 "self hit survived ranking");
    }
    c.expect(self_seen > 100, "generator produced too few self hits");
    return c.outcome("1000 hit sets, " + std::to_string(self_seen) + " self hits removed");
}

// 3 ---------------------------------------------------------------------------
class ScriptedScorer : public TokenScorer {
public:
    TokenProbSequence with_doc, without_doc;
    TokenProbSequence score_tokens(std::string_view prompt, std::string_view) override {
        return prompt.starts_with("Evidence: ") ? with_doc : without_doc;
    }
};

TokenProbSequence random_sequence(Rng& rng, std::size_t n) {
    TokenProbSequence s;
    for (std::size_t i = 0; i < n; ++i) {
        s.tokens.push_back("t" + std::to_string(i));
        const auto kind = rng.below(10);
        s.probs.push_back(kind == 0 ? 0.0 : kind == 1 ? 1.0 : rng.uniform());
    }
    return s;
}

// Straight-line reference: explicit window mean, then a direct product of powers.
double reference_confidence(const std::vector<double>& p, std::size_t window, std::size_t head_k, double omega,
                            double alpha) {
    const std::size_t n = p.size();
    const std::size_t h = window / 2;
    double conf = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j + h >= i && j <= i + h) {
                sum += p[j];
                ++count;
            }
        }
        const double s = std::max(sum / count, 1e-9);
        const double e = i < std::min(head_k, n) ? omega * alpha : 1.0 - alpha;
        conf *= std::pow(s, e);
    }
    return conf;
}

Outcome ig_oracle() {
    Checker c;
    Rng rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        IgConfig cfg;
        cfg.window = static_cast<std::uint32_t>(1 + 2 * rng.below(4));
        cfg.head_k = static_cast<std::uint32_t>(rng.below(12));
        cfg.omega = 0.05 + 0.95 * rng.uniform();
        cfg.alpha = rng.uniform();
        ScriptedScorer scorer;
        const auto n = 1 + rng.below(40);
        scorer.with_doc = random_sequence(rng, n);
        scorer.without_doc = random_sequence(rng, n);

        const double ref_w = reference_confidence(scorer.with_doc.probs, cfg.window, cfg.head_k, cfg.omega, cfg.alpha);
        const double ref_wo =
            reference_confidence(scorer.without_doc.probs, cfg.window, cfg.head_k, cfg.omega, cfg.alpha);
        const double got_w = sequence_confidence(scorer.with_doc, cfg);
        const double got_wo = sequence_confidence(scorer.without_doc, cfg);
        const double rel_w = std::abs(got_w - ref_w) / ref_w;
        const double rel_wo = std::abs(got_wo - ref_wo) / ref_wo;
        worst = std::max({worst, rel_w, rel_wo});
        c.expect(rel_w <= kIgRelTol && rel_wo <= kIgRelTol, "confidence mismatch (trial " + std::to_string(trial) + ")");

        const double ig = information_gain(scorer, "ctx", "doc", "target", cfg);
        // IG is a difference, so its error is measured against the larger confidence.
        const double scale = std::max(ref_w, ref_wo);
        c.expect(std::abs(ig - (ref_w - ref_wo)) <= kIgRelTol * scale, "IG mismatch (trial " + std::to_string(trial) + ")");
        c.expect(ig >= -1.0 && ig <= 1.0, "IG outside [-1, 1]");

        const auto id = smooth_probs(scorer.with_doc, 1);
        c.expect(id.probs == scorer.with_doc.probs && id.tokens == scorer.with_doc.tokens, "W=1 is not identity");
    }
    std::ostringstream d;
    d << "50 sequences, worst relative error " << worst;
    return c.outcome(d.str());
}

// 4 ---------------------------------------------------------------------------
class HashScorer : public TokenScorer {
public:
    TokenProbSequence score_tokens(std::string_view prompt, std::string_view target) override {
        TokenProbSequence s;
        s.tokens = text::words(target);
        const auto base = text::fnv1a64(prompt);
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            std::uint64_t st = base ^ text::fnv1a64(s.tokens[i]) ^ (i * 0x9e3779b97f4a7c15ULL);
            s.probs.push_back(0.02 + 0.96 * static_cast<double>(text::splitmix64(st) >> 11) * 0x1.0p-53);
        }
        return s;
    }
};

const std::vector<std::string> kWords{"the", "enzyme", "binds", "atp", "catalyzes", "reduction", "membrane",
                                      "protein", "kinase", "forms", "dimers", "located", "in", "cytoplasm",
                                      "acyl", "coa", "reaction", "family", "domain", "motif"};

Outcome segment_dominance() {
    Checker c;
    Rng rng(99);
    HashScorer scorer;
    const IgConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> sentences;
        const auto n = 1 + rng.below(5);
        for (std::size_t s = 0; s < n; ++s) {
            std::string sent;
            const auto len = 2 + rng.below(8);
            for (std::size_t w = 0; w < len; ++w) {
                if (w) sent += ' ';
                if (w == 1 && rng.below(4) == 0)
                    sent += "e.g.";
                else
                    sent += kWords[rng.below(kWords.size())];
            }
            sent += ".!?"[rng.below(3)];
            sentences.push_back(sent);
        }
        std::string answer;
        for (const auto& s : sentences) answer += (answer.empty() ? "" : " ") + s;
        const auto fragments = split_fragments(answer);
        std::vector<std::string> got;
        for (const auto& f : fragments) got.push_back(f.text);
        c.expect(got == sentences, "fragments differ from constructed sentences (trial " + std::to_string(trial) + ")");

        const std::string ctx = "Instruction: q" + std::to_string(trial);
        const std::string doc = "FUNCTION: " + kWords[rng.below(kWords.size())];
        double best = -2.0;
        for (const auto& f : fragments) best = std::max(best, information_gain(scorer, ctx, doc, f.text, cfg));
        c.expect(segment_ig(scorer, ctx, doc, fragments, cfg) == best, "segment_ig != max (trial " + std::to_string(trial) + ")");
    }
    return c.outcome("200 cases, exact equality with per-fragment maximum");
}

// 5 ---------------------------------------------------------------------------
Outcome labeling_threshold() {
    Checker c;
    const std::vector<double> igs{0.05, 0.01, -0.2};
    const std::vector<int> want{1, 0, 0};
    const IgConfig cfg;
    c.expect(cfg.tau == 0.01, "default tau");
    for (std::size_t i = 0; i < igs.size(); ++i)
        c.expect(label_snippet(igs[i], cfg.tau) == want[i], "label of " + text::format_double(igs[i]));
    return c.outcome("{0.05, 0.01, -0.2} -> {1, 0, 0}");
}

// 6 ---------------------------------------------------------------------------
Outcome student_learnability() {
    Checker c;
    const auto split = fixtures::synthetic_split(100, 42);
    c.expect(split.train.size() == 640 && split.test.size() == 160, "4:1 split of 8 x 100");
    TrainConfig cfg;
    TrainReport report;
    const auto model = train_filter(split.train, cfg, &report);
    const double acc = accuracy(model, split.test);
    c.expect(acc >= kMinHeldOutAccuracy, "held-out accuracy " + text::format_fixed(acc, 4));
    c.expect(report.epoch_losses.size() == cfg.epochs + 1, "one loss per epoch");
    for (std::size_t e = 1; e < report.epoch_losses.size(); ++e)
        c.expect(report.epoch_losses[e] <= report.epoch_losses[e - 1], "loss increased at epoch " + std::to_string(e));
    std::string losses;
    for (double l : report.epoch_losses) losses += (losses.empty() ? "" : " ") + text::format_fixed(l, 4);
    return c.outcome("held-out accuracy " + text::format_fixed(acc, 4) + ", losses " + losses + " at step size " +
                     text::format_double(cfg.learning_rate));
}

// 7 ---------------------------------------------------------------------------
std::string random_text(Rng& rng) {
    std::string s;
    const auto n = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        const auto len = 1 + rng.below(9);
        for (std::size_t k = 0; k < len; ++k) s += static_cast<char>('a' + rng.below(26));
    }
    return s;
}

EvidencePool random_pool(Rng& rng, std::size_t max_homologs, std::size_t max_snippets,
                         const std::vector<std::string>& value_pool = {}) {
    EvidencePool pool;
    const auto n = 1 + rng.below(max_homologs);
    for (std::size_t h = 0; h < n; ++h) {
        PoolHomolog ph;
        ph.hit.query_id = "q";
        ph.hit.subject_accession = "P" + std::to_string(10000 + h);
        const auto m = rng.below(max_snippets + 1);
        for (std::size_t s = 0; s < m; ++s) {
            const auto& tag = fixtures::all_tags()[rng.below(fixtures::all_tags().size())];
            const auto value = value_pool.empty() ? random_text(rng) : value_pool[rng.below(value_pool.size())];
            ph.snippets.push_back(AnnotationSnippet{AttributeTag(tag), value, ph.hit.subject_accession,
                                                    static_cast<std::uint32_t>(h + 1)});
        }
        pool.homologs.push_back(std::move(ph));
    }
    return pool;
}

std::set<std::pair<std::string, std::uint32_t>> tag_ranks(const EvidencePool& p) {
    std::set<std::pair<std::string, std::uint32_t>> out;
    for (const auto& s : p.flatten()) out.emplace(s.tag.name(), s.homolog_rank);
    return out;
}

Outcome content_agnosticism() {
    Checker c;
    const auto model = fixtures::trained_student();
    Rng rng(31337);
    std::size_t kept_total = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto pool = random_pool(rng, 5, 8);
        auto instr = fixtures::synthetic_examples(1, rng)[rng.below(fixtures::type_rules().size())].instruction;
        const auto before = gate(pool, model, instr);
        for (auto& h : pool.homologs)
            for (auto& s : h.snippets) s.value = random_text(rng);
        const auto after = gate(pool, model, instr);
        kept_total += before.snippet_count();
        c.expect(tag_ranks(before) == tag_ranks(after), "gate decision changed (trial " + std::to_string(trial) + ")");
        c.expect(before.snippet_count() == after.snippet_count(), "retained count changed");
    }
    return c.outcome("100 pools, " + std::to_string(kept_total) + " snippets kept, decisions unchanged");
}

// 8 ---------------------------------------------------------------------------
using Partition = std::set<std::set<std::size_t>>;

Partition partition_of(const ClusterSet& cs, const std::vector<std::size_t>& to_original) {
    Partition p;
    for (const auto& cl : cs.clusters) {
        std::set<std::size_t> s;
        for (auto m : cl.members) s.insert(to_original[m]);
        p.insert(s);
    }
    std::set<std::size_t> noise;
    for (auto m : cs.noise) noise.insert(to_original[m]);
    p.insert(std::set<std::size_t>{static_cast<std::size_t>(-1)});  // separator
    for (auto m : noise) p.insert(std::set<std::size_t>{static_cast<std::size_t>(-2) - m});
    return p;
}

// Brute-force reference: full distance matrix, label propagation to a fixed
// point for core components, canonical border assignment.
Partition reference_dbscan(const std::vector<EmbeddingVector>& pts, const DenoiseConfig& cfg) {
    const auto n = pts.size();
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) adj[i][j] = distance(pts[i], pts[j], cfg.metric) <= cfg.eps;
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t cnt = 0;
        for (std::size_t j = 0; j < n; ++j) cnt += adj[i][j];
        core[i] = cnt >= cfg.min_pts;
    }
    std::vector<std::size_t> label(n);
    std::iota(label.begin(), label.end(), std::size_t{0});
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (core[i] && core[j] && adj[i][j] && label[j] < label[i]) {
                    label[i] = label[j];
                    changed = true;
                }
    }
    // canonical rank: number of points lexicographically smaller (ties share a rank).
    std::vector<std::size_t> rank(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) rank[i] += pts[j] < pts[i];
    std::map<std::size_t, std::set<std::size_t>> groups;
    std::set<std::size_t> noise;
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) {
            groups[label[i]].insert(i);
            continue;
        }
        std::optional<std::size_t> best;
        for (std::size_t j = 0; j < n; ++j)
            if (core[j] && adj[i][j] && (!best || rank[j] < rank[*best])) best = j;
        if (best)
            groups[label[*best]].insert(i);
        else
            noise.insert(i);
    }
    Partition p;
    for (auto& [l, g] : groups) p.insert(g);
    p.insert(std::set<std::size_t>{static_cast<std::size_t>(-1)});
    for (auto m : noise) p.insert(std::set<std::size_t>{static_cast<std::size_t>(-2) - m});
    return p;
}

Outcome dbscan_oracle() {
    Checker c;
    Rng rng(4242);
    std::size_t clusters_seen = 0, noise_seen = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto n = 1 + rng.below(50);
        const auto dim = 2 + rng.below(3);
        const bool grid = rng.below(4) == 0;
        std::vector<EmbeddingVector> pts;
        for (std::size_t i = 0; i < n; ++i) {
            if (!pts.empty() && rng.below(8) == 0) {
                pts.push_back(pts[rng.below(pts.size())]);
                continue;
            }
            EmbeddingVector v(dim);
            for (auto& x : v) x = grid ? static_cast<double>(rng.below(5)) : 4.0 * rng.uniform() - 2.0;
            pts.push_back(v);
        }
        DenoiseConfig cfg;
        cfg.metric = rng.below(2) ? DistanceMetric::Cosine : DistanceMetric::Euclidean;
        cfg.eps = grid && cfg.metric == DistanceMetric::Euclidean ? static_cast<double>(1 + rng.below(2))
                                                                   : 0.05 + rng.uniform() * 0.6;
        cfg.min_pts = static_cast<std::uint32_t>(1 + rng.below(6));

        std::vector<std::size_t> identity(n);
        std::iota(identity.begin(), identity.end(), std::size_t{0});
        const auto got = dbscan(pts, cfg);
        const auto ref = reference_dbscan(pts, cfg);
        c.expect(partition_of(got, identity) == ref, "differs from reference (trial " + std::to_string(trial) + ")");
        clusters_seen += got.clusters.size();
        noise_seen += got.noise.size();

        std::size_t total = got.noise.size();
        for (const auto& cl : got.clusters) total += cl.members.size();
        c.expect(total == n, "not a partition");

        auto perm = identity;
        rng.shuffle(perm);
        std::vector<EmbeddingVector> shuffled;
        for (auto i : perm) shuffled.push_back(pts[i]);
        c.expect(partition_of(dbscan(shuffled, cfg), perm) == partition_of(got, identity),
                 "permutation changed the partition (trial " + std::to_string(trial) + ")");
    }
    return c.outcome("500 clouds, " + std::to_string(clusters_seen) + " clusters, " + std::to_string(noise_seen) +
                     " noise points");
}

// 9 ---------------------------------------------------------------------------
EvidencePool pool_of(const std::vector<std::vector<std::pair<std::string, std::string>>>& homologs) {
    EvidencePool pool;
    pool.stage = PoolStage::Horizontal;
    for (std::size_t h = 0; h < homologs.size(); ++h) {
        PoolHomolog ph;
        ph.hit.subject_accession = "P" + std::to_string(20000 + h);
        for (const auto& [tag, value] : homologs[h])
            ph.snippets.push_back(AnnotationSnippet{AttributeTag(tag), value, ph.hit.subject_accession,
                                                    static_cast<std::uint32_t>(h + 1)});
        pool.homologs.push_back(ph);
    }
    return pool;
}

Outcome anchor_selection() {
    Checker c;
    BackendConfig ecfg;
    ecfg.role = BackendRole::Embedder;
    ecfg.endpoint = "mock:hash";
    BackendClient embedder(ecfg);
    const DenoiseConfig dcfg;

    // Case study: two homologs agree on the reaction, a third reports another.
    {
        auto pool = pool_of({{{"CATALYTIC ACTIVITY", kCaseReaction}},
                             {{"CATALYTIC ACTIVITY", kCaseReaction}},
                             {{"CATALYTIC ACTIVITY",
                               "Reaction=L-glutamate + NH4(+) + ATP = L-glutamine + ADP + phosphate + H(+); "
                               "Xref=Rhea:RHEA:16169; EC=6.3.1.2;"}}});
        pool.homologs[0].hit.subject_accession = "Q55C17";
        pool.homologs[0].snippets[0].source_accession = "Q55C17";
        pool.homologs[1].hit.subject_accession = "Q9N5Y2";
        pool.homologs[1].snippets[0].source_accession = "Q9N5Y2";
        const auto r = denoise(pool, embedder, dcfg);
        c.expect(r.selection.selected == std::vector<std::size_t>{0, 1}, "case study keeps ranks 1 and 2 only");
        c.expect(r.selection.anchor_ranks == std::vector<std::uint32_t>{1}, "case study anchors on rank 1");
        c.expect(r.context.text == "Homolog 1 (Q55C17): [CATALYTIC ACTIVITY]: " + kCaseReaction +
                                       "\nHomolog 2 (Q9N5Y2): [CATALYTIC ACTIVITY]: " + kCaseReaction + "\n",
                 "case study context text");
    }

    // Fallback: rank 1 is all noise, ranks 2 and 3 share a cluster, rank 4 is noise.
    {
        const std::vector<EmbeddingVector> v{{1, 0, 0}, {0, 1, 0}, {0, 1, 0.01}, {0, 0, 1}};
        const auto pool = pool_of({{{"FUNCTION", "a"}}, {{"FUNCTION", "b"}}, {{"FUNCTION", "c"}}, {{"FUNCTION", "d"}}});
        const auto cs = dbscan(v, dcfg);
        const auto sel = select_anchor_clusters(cs, pool, 1);
        c.expect(sel.anchor_ranks == std::vector<std::uint32_t>{2}, "fallback anchors on rank 2");
        c.expect(sel.selected == std::vector<std::size_t>{1, 2}, "fallback selects the rank-2 cluster");
        c.expect(!sel.pass_through, "fallback is not pass-through");
    }
    // Rank 1 kept nothing after the horizontal stage.
    {
        const std::vector<EmbeddingVector> v{{0, 1, 0}, {0, 1, 0.01}};
        const auto pool = pool_of({{}, {{"FUNCTION", "b"}}, {{"FUNCTION", "c"}}});
        const auto sel = select_anchor_clusters(dbscan(v, dcfg), pool, 1);
        c.expect(sel.anchor_ranks == std::vector<std::uint32_t>{2}, "empty rank 1 falls back to rank 2");
    }
    // All noise: pass-through with a warning.
    {
        const std::vector<EmbeddingVector> v{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        const auto pool = pool_of({{{"FUNCTION", "a"}}, {{"FUNCTION", "b"}}, {{"FUNCTION", "c"}}});
        const auto sel = select_anchor_clusters(dbscan(v, dcfg), pool, 1);
        c.expect(sel.pass_through && sel.selected.size() == 3 && !sel.warnings.empty(), "all-noise pass-through");
    }
    // Top-2: ranks 1 and 2 in different clusters; union of both.
    {
        const std::vector<EmbeddingVector> v{{1, 0, 0}, {0, 1, 0}, {1, 0.01, 0}, {0.01, 1, 0}, {0, 0, 1}};
        const auto pool = pool_of({{{"FUNCTION", "a"}}, {{"FUNCTION", "b"}}, {{"FUNCTION", "c"}}, {{"FUNCTION", "d"}},
                                   {{"FUNCTION", "e"}}});
        const auto cs = dbscan(v, dcfg);
        const auto labels = cs.labels(v.size());
        std::set<std::size_t> oracle;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (labels[i] >= 0 && (labels[i] == labels[0] || labels[i] == labels[1])) oracle.insert(i);
        const auto sel = select_anchor_clusters(cs, pool, 2);
        c.expect(std::set<std::size_t>(sel.selected.begin(), sel.selected.end()) == oracle, "top-2 union");
        c.expect(oracle == std::set<std::size_t>{0, 1, 2, 3}, "top-2 fixture shape");
        c.expect(select_anchor_clusters(cs, pool, 1).selected == std::vector<std::size_t>{0, 2}, "top-1 keeps cluster A");
    }
    // Anchor guarantee on random pools.
    {
        Rng rng(5);
        const std::vector<std::string> values{"alpha beta", "alpha beta gamma", "delta", "epsilon zeta",
                                              "epsilon zeta eta", "theta"};
        for (int trial = 0; trial < 200; ++trial) {
            auto pool = random_pool(rng, 4, 4, values);
            pool.stage = PoolStage::Horizontal;
            const auto r = denoise(pool, embedder, dcfg);
            const auto flat = pool.flatten();
            const auto labels = r.clusters.labels(flat.size());
            bool anchor_clustered = false;
            for (std::size_t i = 0; i < flat.size(); ++i) anchor_clustered |= flat[i].homolog_rank == 1 && labels[i] >= 0;
            if (!anchor_clustered) continue;
            bool has_anchor = false;
            for (auto i : r.selection.selected) has_anchor |= flat[i].homolog_rank == 1;
            c.expect(has_anchor, "rank-1 snippet missing from selection (trial " + std::to_string(trial) + ")");
        }
    }
    return c.outcome("case study, fallback, pass-through, top-2 union and anchor guarantee hold");
}

// 10 --------------------------------------------------------------------------
class RandomHits : public HitSource {
public:
    RandomHits(std::vector<std::string> accessions, std::uint64_t seed) : acc_(std::move(accessions)), seed_(seed) {}
    std::vector<HomologHit> hits_for(const QARecord& r) override {
        Rng rng(seed_ ^ text::fnv1a64(r.id));
        std::vector<HomologHit> out;
        const auto n = rng.below(6);
        for (std::size_t i = 0; i < n; ++i) {
            HomologHit h;
            h.query_id = r.id;
            h.subject_accession = acc_[rng.below(acc_.size())];
            h.alignment_length = 20;
            h.identity_count = static_cast<std::uint32_t>(5 + rng.below(10));
            h.percent_identity = 5.0 * h.identity_count;
            h.e_value = rng.uniform();
            h.bitscore = 100 * rng.uniform();
            out.push_back(h);
        }
        return out;
    }
    std::string describe() const override { return "random"; }

private:
    std::vector<std::string> acc_;
    std::uint64_t seed_;
};

std::string write_random_dat(const std::filesystem::path& path, std::size_t entries, Rng& rng,
                             std::vector<std::string>& accessions) {
    const std::vector<std::string> tags{"FUNCTION", "CATALYTIC ACTIVITY", "SUBCELLULAR LOCATION", "PATHWAY",
                                        "SUBUNIT",  "PTM",                "SIMILARITY"};
    const std::vector<std::string> phrases{"Catalyzes the reduction of enoyl-CoA.",
                                           "Catalyzes the reduction of enoyl-CoA to acyl-CoA.",
                                           "Cytoplasm.",
                                           "Endoplasmic reticulum membrane.",
                                           "Lipid metabolism; fatty acid biosynthesis.",
                                           "Homodimer.",
                                           "Belongs to the kinase family.",
                                           "Phosphorylated on serine residues."};
    std::ofstream out(path);
    for (std::size_t e = 0; e < entries; ++e) {
        char acc[8];
        std::snprintf(acc, sizeof acc, "P1X%02zu0", e);
        accessions.emplace_back(acc);
        out << "ID   RAND" << e << "_TEST              Reviewed;         100 AA.\n";
        out << "AC   " << acc << ";\n";
        const auto blocks = rng.below(7);
        for (std::size_t b = 0; b < blocks; ++b) {
            out << "CC   -!- " << tags[rng.below(tags.size())] << ": " << phrases[rng.below(phrases.size())] << "\n";
        }
        out << "SQ   SEQUENCE   100 AA;  11000 MW;  0000000000000000 CRC64;\n     MKV\n//\n";
    }
    return path.string();
}

Outcome stage_monotonicity() {
    Checker c;
    fixtures::TempDir dir;
    Rng rng(77);
    std::vector<std::string> accessions;
    write_random_dat(dir / "random.dat", 30, rng, accessions);
    const auto index = std::make_shared<AnnotationIndex>(AnnotationIndex::build(dir / "random.dat", ""));
    const auto model = std::make_shared<FilterModel>(fixtures::trained_student());

    PipelineConfig cfg;
    const auto hits = std::make_shared<RandomHits>(accessions, 11);
    auto make_services = [&](AblationMode mode) {
        PipelineServices s;
        s.config = cfg;
        s.config.mode = mode;
        s.index = index;
        s.filter = model;
        s.hits = hits;
        s.scorer = std::make_shared<BackendClient>(cfg.scorer);
        s.embedder = std::make_shared<BackendClient>(cfg.embedder);
        s.generator = std::make_shared<BackendClient>(cfg.generator);
        return s;
    };
    const AblationMode modes[] = {AblationMode::RawOnly, AblationMode::HorizontalOnly, AblationMode::VerticalOnly,
                                  AblationMode::Full2D};
    std::map<AblationMode, PipelineServices> services;
    for (auto m : modes) services.emplace(m, make_services(m));

    std::size_t raw_total = 0, hor_total = 0, ver_total = 0;
    for (int trial = 0; trial < 100; ++trial) {
        QARecord r;
        r.id = "rec" + std::to_string(trial);
        r.instruction = fixtures::synthetic_examples(1, rng)[rng.below(fixtures::type_rules().size())].instruction;
        r.sequence = "MKVLAAGIVGLLLA";
        r.task = "protein_function";
        r.instruction_type = "function";
        std::optional<EvidencePool> raw_ref;
        for (auto m : modes) {
            const auto art = run_query(services.at(m), r);
            const auto& pools = art.doc.at("pools");
            const auto raw = pool_from_json(pools.at("RAW"));
            if (!raw_ref) raw_ref = raw;
            c.expect(raw == *raw_ref, "RAW pool depends on the mode");
            c.expect(art.doc.at("errors").empty(), "stage error in " + std::string(to_string(m)));
            c.expect(pools.contains("HORIZONTAL") == runs_horizontal(m), "HORIZONTAL snapshot presence");
            c.expect(pools.contains("VERTICAL") == runs_vertical(m), "VERTICAL snapshot presence");
            std::optional<EvidencePool> hor, ver;
            if (pools.contains("HORIZONTAL")) hor = pool_from_json(pools.at("HORIZONTAL"));
            if (pools.contains("VERTICAL")) ver = pool_from_json(pools.at("VERTICAL"));
            if (hor) c.expect(is_sub_multiset(*hor, raw), "C_hor not within C_raw");
            if (ver) c.expect(is_sub_multiset(*ver, hor ? *hor : raw), "C_hat not within its input pool");
            if (ver) c.expect(is_sub_multiset(*ver, raw), "C_hat not within C_raw");
            if (m == AblationMode::Full2D) {
                raw_total += raw.snippet_count();
                hor_total += hor->snippet_count();
                ver_total += ver->snippet_count();
            }
        }
    }
    return c.outcome("100 pools x 4 modes; FULL_2D snippets raw " + std::to_string(raw_total) + " -> horizontal " +
                     std::to_string(hor_total) + " -> vertical " + std::to_string(ver_total));
}

// 11 --------------------------------------------------------------------------
bool near(double a, double b) { return std::abs(a - b) <= kMetricTol; }

Outcome metric_oracles() {
    Checker c;
    const double eps = eval::kSmoothingEpsilon;
    // identity
    c.expect(near(eval::bleu4("the kinase binds ATP", "the kinase binds ATP"), 1.0), "bleu4 identity");
    c.expect(near(eval::rouge_l("the kinase binds ATP", "the kinase binds ATP"), 1.0), "rouge_l identity");
    // disjoint, equal length: (eps/4 * eps/3 * eps/2 * eps/1)^(1/4)
    {
        const double want = std::pow(eps * eps * eps * eps / 24.0, 0.25);
        const double got = eval::bleu4("alpha beta gamma delta", "one two three four");
        c.expect(near(got, want) && std::abs(got - want) <= 1e-9 * want, "bleu4 disjoint");
        c.expect(eval::rouge_l("alpha beta gamma delta", "one two three four") == 0.0, "rouge_l disjoint");
    }
    // one 4-gram match: p = 4/5, 3/4, 2/3, 1/2
    c.expect(near(eval::bleu4("a b c d e", "a b c d f"), std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25)),
             "bleu4 single 4-gram");
    // brevity penalty, all precisions 1
    c.expect(near(eval::bleu4("a b c d", "a b c d e f"), std::exp(1.0 - 6.0 / 4.0)), "bleu4 brevity penalty");
    // clipping
    c.expect(near(eval::bleu4("the the the the", "the cat"), std::pow(0.25 * (eps / 3) * (eps / 2) * eps, 0.25)),
             "bleu4 clipped counts");
    // manual LCS
    c.expect(near(eval::rouge_l("a b c", "a c"), 0.8), "rouge_l a b c / a c");
    c.expect(near(eval::rouge_l("the cat sat", "the dog sat down"), 4.0 / 7.0), "rouge_l partial");
    // punctuation is detached by the tokenizer
    c.expect(near(eval::rouge_l("binds ATP.", "binds ATP ."), 1.0), "punctuation detachment");

    eval::EntityLexicon lex;
    for (const char* e : {"NADPH", "ATP", "ADP", "kinase", "fatty acid", "fatty acid elongation"}) lex.add(e);
    c.expect(lex.extract("the kinase binds ATP") == std::vector<std::string>{"kinase", "ATP"}, "entity extraction");
    c.expect(lex.extract("nothing here") .empty(), "no entities");
    c.expect(lex.extract("involved in fatty acid elongation") == std::vector<std::string>{"fatty acid elongation"},
             "longest match");
    const std::string cand = "the kinase uses ATP and makes NADPH";
    const std::string ref = "a kinase consumes ATP to produce ADP";
    c.expect(near(eval::e_bleu(cand, ref, lex, 2), std::sqrt((2.0 / 3.0) * 0.5)), "e_bleu2 manual");
    c.expect(near(eval::e_bleu(cand, ref, lex, 4), std::pow((2.0 / 3.0) * 0.5 * eps * eps, 0.25)), "e_bleu4 manual");
    c.expect(near(eval::e_bleu("kinase ATP ADP NADPH", "the kinase with ATP and ADP or NADPH", lex, 4), 1.0),
             "e_bleu identical entity sequences");
    c.expect(eval::e_bleu("no entities at all", ref, lex, 2) == 0.0, "e_bleu empty candidate");

    // E-BLEU ignores non-entity rewording.
    Rng rng(8);
    const std::vector<std::string> filler{"quickly", "then", "so", "very", "it", "also", "which", "protein", "zz"};
    const std::vector<std::string> entity_words{"kinase", "ATP", "ADP", "NADPH"};
    int perturbations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> toks;
        std::vector<bool> is_entity;
        const auto n = 4 + rng.below(10);
        for (std::size_t i = 0; i < n; ++i) {
            const bool ent = rng.below(3) == 0;
            toks.push_back(ent ? entity_words[rng.below(entity_words.size())] : filler[rng.below(filler.size())]);
            is_entity.push_back(ent);
        }
        const auto join = [](const std::vector<std::string>& v) { return text::join(v, " "); };
        const double before2 = eval::e_bleu(join(toks), ref, lex, 2);
        const double before4 = eval::e_bleu(join(toks), ref, lex, 4);
        for (std::size_t i = 0; i < n; ++i)
            if (!is_entity[i]) toks[i] = filler[rng.below(filler.size())];
        c.expect(eval::e_bleu(join(toks), ref, lex, 2) == before2, "e_bleu2 changed by rewording");
        c.expect(eval::e_bleu(join(toks), ref, lex, 4) == before4, "e_bleu4 changed by rewording");
        ++perturbations;
    }
    return c.outcome("fixed pairs match manual values; " + std::to_string(perturbations) + " rewordings invariant");
}

// 12 --------------------------------------------------------------------------
int run_cli(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "protrag");
    std::ostringstream out, err;
    const int rc = cli::run(args, out, err);
    if (out_text) *out_text = out.str() + err.str();
    return rc;
}

std::map<std::string, std::string> artifacts_in(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name == "summary.json" || name.ends_with(".timings.json")) continue;
        out[name] = fixtures::read_file(e.path());
    }
    return out;
}

Outcome end_to_end_determinism() {
    Checker c;
    fixtures::TempDir dir;
    std::string log;
    c.expect(run_cli({"index", "build", "--dat", fixtures::data("swissprot_mini.dat").string(), "--go",
                      fixtures::data("go_mini.obo").string(), "--out", (dir / "index").string()},
                     &log) == 0,
             "index build: " + log);
    {
        std::ofstream f(dir / "student.model");
        fixtures::trained_student().save(f);
    }
    const std::vector<std::string> common{"--offline",      "--index", (dir / "index").string(), "--filter-model",
                                          (dir / "student.model").string(), "--hits",
                                          fixtures::data("hits_fixture.tsv").string(), "--mode", "FULL_2D"};
    auto batch = [&](const std::filesystem::path& out) {
        auto args = common;
        for (const char* a : {"qa", "batch", "--dataset"}) args.push_back(a);
        args.push_back(fixtures::data("qa_fixture.jsonl").string());
        args.push_back("--out");
        args.push_back(out.string());
        return run_cli(args, &log);
    };
    c.expect(batch(dir / "a") == 0, "first batch: " + log);
    c.expect(batch(dir / "b") == 0, "second batch: " + log);
    const auto a = artifacts_in(dir / "a");
    const auto b = artifacts_in(dir / "b");
    c.expect(a.size() == 10, "10 artifacts, got " + std::to_string(a.size()));
    c.expect(a == b, "two runs differ");

    std::size_t removed = 0;
    for (const auto& [name, body] : a) {
        if (removed == 3) break;
        std::filesystem::remove(dir / "a" / name);
        ++removed;
    }
    c.expect(batch(dir / "a") == 0, "resumed batch: " + log);
    const auto summary = json::parse(fixtures::read_file(dir / "a" / "summary.json"));
    c.expect(summary.at("computed") == 3 && summary.at("resumed") == 7, "resume recomputed " + summary.dump());
    c.expect(artifacts_in(dir / "a") == b, "resumed run differs");
    c.expect(summary.at("artifacts").get<std::size_t>() == artifacts_in(dir / "a").size(), "summary census");

    const auto cs = json::parse(b.at("cs1.json"));
    const std::string want = "Homolog 1 (Q55C17): [CATALYTIC ACTIVITY]: " + kCaseReaction +
                             "\nHomolog 2 (Q9N5Y2): [CATALYTIC ACTIVITY]: " + kCaseReaction + "\n";
    c.expect(cs.at("context").get<std::string>() == want, "case-study context: " + cs.at("context").dump());
    for (const auto& [name, body] : b) {
        const auto j = json::parse(body);
        c.expect(replay_context(j) == j.at("context").get<std::string>(), "replay of " + name);
    }
    return c.outcome("10 artifacts byte-identical across runs and resume; case-study context has the two anchored lines");
}

// 13 --------------------------------------------------------------------------
Outcome default_conformance() {
    Checker c;
    const auto cfg = config_from_tree(json(nullptr));
    c.expect(cfg.retrieval.top_k == 3, "top_k");
    c.expect(cfg.ig.omega == 0.8, "omega");
    c.expect(cfg.ig.tau == 0.01, "tau");
    c.expect(cfg.generation.temperature == 0.7, "temperature");
    c.expect(cfg.generation.top_p == 0.9, "top_p");
    c.expect(cfg.generation.max_tokens == 2048, "max_tokens");
    c.expect(cfg.student.epochs == 4, "epochs");

    // The same values, with their origin, appear in every run's metadata.
    fixtures::TempDir dir;
    auto idx = AnnotationIndex::build(fixtures::data("swissprot_mini.dat"), "");
    idx.save(dir.path());
    auto run_cfg = cfg;
    run_cfg.mode = AblationMode::RawOnly;
    run_cfg.paths.index = dir.path();
    run_cfg.paths.hits = fixtures::data("hits_fixture.tsv");
    const auto services = PipelineServices::open(run_cfg);
    QARecord r{"cs1", "What does it do?", "MKV", std::nullopt, "protein_function", "function"};
    const auto art = run_query(services, r);
    const auto& defaults = art.doc.at("metadata").at("defaults");
    const std::vector<std::pair<std::string, json>> anchors{
        {"retrieval.top_k", 3},         {"ig.omega", 0.8},          {"ig.tau", 0.01},
        {"generation.temperature", 0.7}, {"generation.top_p", 0.9}, {"generation.max_tokens", 2048},
        {"student.epochs", 4}};
    for (const auto& [key, value] : anchors) {
        c.expect(defaults.contains(key) && defaults.at(key).at("value") == value &&
                     defaults.at(key).at("origin") == "published",
                 key + " traced in run metadata");
    }
    return c.outcome("top_k=3 omega=0.8 tau=0.01 T=0.7 top_p=0.9 max_tokens=2048 epochs=4, each marked published");
}

struct Criterion {
    int id;
    std::string name;
    double limit_s;  // 0 = no runtime bound
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "parser golden suite", 1.0, parser_golden},
        {2, "leakage exclusion", 5.0, leakage_exclusion},
        {3, "IG arithmetic oracle", 5.0, ig_oracle},
        {4, "segment-wise dominance", 10.0, segment_dominance},
        {5, "labeling threshold", 0.0, labeling_threshold},
        {6, "student learnability", 30.0, student_learnability},
        {7, "content-agnosticism", 0.0, content_agnosticism},
        {8, "DBSCAN oracle equivalence", 60.0, dbscan_oracle},
        {9, "anchor selection", 0.0, anchor_selection},
        {10, "stage monotonicity", 0.0, stage_monotonicity},
        {11, "metric oracles", 0.0, metric_oracles},
        {12, "end-to-end determinism", 30.0, end_to_end_determinism},
        {13, "default-parameter conformance", 0.0, default_conformance},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (cr.limit_s > 0 && secs > cr.limit_s) {
            o.pass = false;
            o.detail += "; exceeded " + text::format_fixed(cr.limit_s, 0) + " s limit";
        }
        if (!o.pass) ++failed;
        std::printf("%s AC-%02d %-30s %7.3f s  %s\n", o.pass ? "[PASS]" : "[FAIL]", cr.id, cr.name.c_str(), secs,
                    o.detail.c_str());
    }
    std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
