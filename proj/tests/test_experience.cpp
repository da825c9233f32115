// SPDX-License-Identifier: Apache-2.0
#include "scs/experience.hpp"
#include "sim_fixture.hpp"
#include "test_support.hpp"

#include <gmpxx.h>

#include <cmath>
#include <random>

using namespace scs;
using namespace scs::testing;

namespace {

// Captures every request and answers with a fixed text.
class CapturingBackend final : public Backend {
public:
    explicit CapturingBackend(std::string reply) : _reply(std::move(reply)) {}
    GenerationResponse generate(const GenerationRequest& request) override
    {
        requests.push_back(request);
        GenerationResponse r;
        r.text = _reply;
        return r;
    }
    std::string_view mode() const override { return "scripted"; }

    std::vector<GenerationRequest> requests;

private:
    std::string _reply;
};

// Forwards to a scripted backend and keeps every request.
class RecordingBackend final : public Backend {
public:
    explicit RecordingBackend(const json& rules) : _inner(ScriptedBackend::from_json(rules)) {}
    GenerationResponse generate(const GenerationRequest& request) override
    {
        requests.push_back(request);
        return _inner->generate(request);
    }
    std::string_view mode() const override { return "scripted"; }

    std::vector<GenerationRequest> requests;

private:
    std::shared_ptr<ScriptedBackend> _inner;
};

bool any_request_mentions(const RecordingBackend& b, std::string_view role, std::string_view text)
{
    for (const auto& r: b.requests)
        if (r.role_label == role)
            for (const auto& m: r.messages)
                if (m.text.find(text) != std::string::npos)
                    return true;
    return false;
}

RetrospectiveReport fixture_report(const std::string& run_id)
{
    auto body = read_json(fixture("advisor/retrospective.json"));
    return retrospective_from_json(
        json {{"run_id", run_id}, {"occupation", "Senior Financial Advisor"}, {"sections", body["sections"]}});
}

std::shared_ptr<Gateway> extractor(json items)
{
    return scripted(json::array({rule("analyst", "TASK: extract-experience", std::move(items))}));
}

ExperienceItem item(const std::string& id, const std::string& occupation, const std::string& text = "x")
{
    return {id, ExperienceKind::lesson, text, occupation, id.substr(0, id.find(':'))};
}

json group(const std::string& text, std::vector<std::string> members)
{
    return {{"text", text}, {"members", members}};
}

OccupationDigest finance_digest()
{
    OccupationDigest d;
    d.occupation = "Financial and Investment Analysts";
    d.groups = {{"Fix reviewer corrections the same day", {"r1:e1", "r2:e1", "r3:e2"}},
                {"Reconcile shared figures across documents", {"r1:e2", "r2:e3"}},
                {"Label gross and net returns", {"r3:e1"}}};
    return d;
}

// Exact upper tail Σ_{k=m}^{n} C(n,k) with GMP.
mpz_class gmp_tail(unsigned long n, unsigned long m)
{
    mpz_class sum = 0, c;
    for (unsigned long k = m; k <= n; ++k) {
        mpz_bin_uiui(c.get_mpz_t(), n, k);
        sum += c;
    }
    return sum;
}

double gmp_p(unsigned long n, unsigned long m)
{
    mpq_class q(gmp_tail(n, m), mpz_class(1) << n);
    q.canonicalize();
    return mpf_class(q, 256).get_d();
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Extract, FixtureReportYieldsTaggedItems)
{
    auto gw = extractor(read_json(fixture("advisor/experience_items.json")));
    auto items = extract_items(fixture_report("run-a"), *gw);
    ASSERT_EQ(items.size(), 4u);
    EXPECT_EQ(items[0].item_id, "run-a:e1");
    EXPECT_EQ(items[3].item_id, "run-a:e4");
    EXPECT_EQ(items[0].kind, ExperienceKind::failure_mode);
    EXPECT_NE(items[0].text.find("uncorrected"), std::string::npos);
    for (const auto& i: items) {
        EXPECT_EQ(i.source_run, "run-a");
        EXPECT_EQ(i.occupation, "Senior Financial Advisor");
    }
}

TEST(Extract, EmptyExtractionIsRejected)
{
    auto report = fixture_report("run-a");
    for (auto& s: report.sections)
        if (s.key == "recommendations")
            s.text.clear();
    auto gw = extractor(json {{"items", json::array()}});
    auto e = error_of([&] { extract_items(report, *gw); });
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    EXPECT_EQ(e.details(), std::vector<std::string> {"items"});
}

TEST(Extract, BadKindIsNamed)
{
    auto gw = extractor(json {{"items", {{{"kind", "lesson"}, {"text", "a"}}, {{"kind", "tip"}, {"text", "b"}}}}});
    auto e = error_of([&] { extract_items(fixture_report("run-a"), *gw); });
    EXPECT_EQ(e.details(), std::vector<std::string> {"items[1].kind"});
}

TEST(Extract, ReportsKeepDistinctSourceRuns)
{
    auto gw = extractor(read_json(fixture("advisor/experience_items.json")));
    auto a = extract_items(fixture_report("run-a"), *gw);
    auto b = extract_items(fixture_report("run-b"), *gw);
    EXPECT_EQ(a.front().source_run, "run-a");
    EXPECT_EQ(b.front().source_run, "run-b");
    EXPECT_NE(a.front().item_id, b.front().item_id);

    TempDir dir;
    a.insert(a.end(), b.begin(), b.end());
    write_items(dir / "items.jsonl", a);
    auto back = read_items(dir / "items.jsonl");
    ASSERT_EQ(back.size(), 8u);
    EXPECT_EQ(to_json(back[5]).dump(), to_json(a[5]).dump());
}

// ---------------------------------------------------------------------------

TEST(Digest, CountsAndRankFollowThePartition)
{
    std::vector<ExperienceItem> items {item("r:a", "Nurse"), item("r:b", "Nurse"), item("r:c", "Nurse")};
    auto d = digest_from_partition("Nurse", items, json {{"groups", {group("C", {"r:c"}), group("AB", {"r:a", "r:b"})}}});
    ASSERT_EQ(d.groups.size(), 2u);
    EXPECT_EQ(d.groups[0].canonical_text, "AB");
    EXPECT_EQ(d.groups[0].count(), 2);
    EXPECT_EQ(d.groups[1].count(), 1);
    EXPECT_EQ(d.total(), 3);

    auto j = to_json(d);
    EXPECT_EQ(j["groups"][0]["rank"], 1);
    EXPECT_EQ(j["groups"][0]["count"], 2);
    EXPECT_EQ(to_json(digest_from_json(j)).dump(), j.dump());
}

TEST(Digest, BadPartitionsAreRejected)
{
    std::vector<ExperienceItem> items {item("r:a", "Nurse"), item("r:b", "Nurse"), item("r:c", "Nurse")};
    auto e = error_of([&] { digest_from_partition("Nurse", items, json {{"groups", {group("AB", {"r:a", "r:b"})}}}); });
    EXPECT_EQ(e.code(), ErrorCode::PartitionInvalid);
    EXPECT_EQ(e.details(), std::vector<std::string> {"r:c"});

    e = error_of([&] {
        digest_from_partition("Nurse", items, json {{"groups", {group("AB", {"r:a", "r:b"}), group("BC", {"r:b", "r:c"})}}});
    });
    EXPECT_EQ(e.code(), ErrorCode::PartitionInvalid);
    EXPECT_EQ(e.details(), std::vector<std::string> {"r:b"});

    e = error_of([&] {
        digest_from_partition("Nurse", items, json {{"groups", {group("ABC", {"r:a", "r:b", "r:c", "r:z"})}}});
    });
    EXPECT_EQ(e.code(), ErrorCode::PartitionInvalid);
    EXPECT_EQ(e.details(), std::vector<std::string> {"r:z"});

    EXPECT_EQ(error_code_of([&] { digest_from_partition("Nurse", items, json {{"clusters", 1}}); }),
              ErrorCode::SchemaViolation);
}

TEST(Digest, GroupingPerOccupationConservesCounts)
{
    std::vector<ExperienceItem> items;
    for (int i = 1; i <= 6; ++i)
        items.push_back(item("f" + std::to_string(i) + ":e1", i % 2 ? "Senior Financial Advisor" : " senior financial advisor"));
    for (int i = 1; i <= 4; ++i)
        items.push_back(item("n" + std::to_string(i) + ":e1", "Registered Nurse"));
    auto gw = scripted(json::array({
        rule("analyst", "OCCUPATION: Senior Financial Advisor",
             json {{"groups", {group("same-day fixes", {"f1:e1", "f2:e1", "f3:e1", "f4:e1"}), group("reconcile", {"f5:e1", "f6:e1"})}}}),
        rule("analyst", "OCCUPATION: Registered Nurse",
             json {{"groups", {group("handoff", {"n1:e1"}), group("charting", {"n2:e1", "n3:e1", "n4:e1"})}}}),
    }));
    auto digests = group_merge_count(items, *gw);
    ASSERT_EQ(digests.size(), 2u);
    EXPECT_EQ(gw->calls(), 2);

    // oracle: recount the multiset of items per occupation key
    std::map<std::string, int> expected;
    for (const auto& i: items)
        ++expected[occupation_key(i.occupation)];
    for (const auto& [key, d]: digests) {
        EXPECT_EQ(d.total(), expected.at(key)) << key;
        EXPECT_EQ(occupation_key(d.occupation), key);
    }
    EXPECT_EQ(digests.at("senior financial advisor").groups[0].count(), 4);
    EXPECT_EQ(digests.at("registered nurse").groups[0].canonical_text, "charting");

    EXPECT_EQ(error_code_of([&] { group_merge_count({}, *gw); }), ErrorCode::PreconditionViolation);
}

TEST(Digest, RandomPartitionsKeepInvariants)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        auto n = 1 + rng() % 40;
        auto k = 1 + rng() % n;
        std::vector<ExperienceItem> items;
        std::vector<std::vector<std::string>> groups(k);
        for (std::size_t i = 0; i < n; ++i) {
            items.push_back(item("r:e" + std::to_string(i), "Nurse"));
            groups[rng() % k].push_back(items.back().item_id);
        }
        json partition = json::array();
        for (std::size_t g = 0; g < k; ++g)
            partition.push_back(group("g" + std::to_string(g), groups[g]));
        auto d = digest_from_partition("Nurse", items, partition);
        ASSERT_EQ(d.total(), static_cast<int>(n));
        std::map<std::string, int> seen;
        for (std::size_t g = 0; g < d.groups.size(); ++g) {
            if (g > 0)
                ASSERT_GE(d.groups[g - 1].count(), d.groups[g].count());
            for (const auto& m: d.groups[g].members)
                ++seen[m];
        }
        ASSERT_EQ(seen.size(), n);
        for (const auto& [id, c]: seen)
            ASSERT_EQ(c, 1);
    }
}

// ---------------------------------------------------------------------------

TEST(Skill, FinanceSkillHasFourSections)
{
    auto backend = std::make_shared<CapturingBackend>(read_text(fixture("advisor/skill_finance.json")));
    Gateway gw(backend);
    auto skill = build_skill(finance_digest(), gw);
    ASSERT_EQ(skill.sections.size(), 4u);
    EXPECT_EQ(skill.slug(), "financial-and-investment-analysts");
    EXPECT_EQ(skill.sections[0].heading, "Data Integrity and Single-Source-of-Truth");
    EXPECT_EQ(skill.sections[0].rules[0].tag, "source-of-truth");
    EXPECT_EQ(skill.sections[3].heading, "Regulatory, Compliance, and Certification Standards");

    // ranked experience reaches the creator most frequent first
    ASSERT_EQ(backend->requests.size(), 1u);
    const auto& ctx = backend->requests[0].messages.front().text;
    auto a = ctx.find("1. (seen 3x) Fix reviewer corrections");
    auto b = ctx.find("2. (seen 2x) Reconcile shared figures");
    auto c = ctx.find("3. (seen 1x) Label gross and net");
    ASSERT_NE(a, std::string::npos);
    EXPECT_LT(a, b);
    EXPECT_LT(b, c);
    EXPECT_NE(c, std::string::npos);

    auto md = render_skill_markdown(skill);
    EXPECT_NE(md.find("# Skill: financial-and-investment-analysts"), std::string::npos);
    EXPECT_NE(md.find("**Trigger scope:** Financial models"), std::string::npos);
    EXPECT_NE(md.find("## 1. Data Integrity and Single-Source-of-Truth"), std::string::npos);
    EXPECT_NE(md.find("- **[source-of-truth]** Every shared figure"), std::string::npos);
    EXPECT_EQ(to_json(skill_from_json(to_json(skill))).dump(), to_json(skill).dump());
}

TEST(Skill, EmptyDigestIsAPreconditionFailure)
{
    auto gw = scripted(json::array());
    OccupationDigest d;
    d.occupation = "Nurse";
    EXPECT_EQ(error_code_of([&] { build_skill(d, *gw); }), ErrorCode::PreconditionViolation);
    EXPECT_EQ(gw->calls(), 0);
}

TEST(Skill, MalformedSkillIsRejected)
{
    auto gw = scripted(json::array({rule("analyst", "TASK: build-skill",
                                         json {{"trigger_scope", "x"}, {"sections", {{{"heading", "A"}, {"rules", json::array()}}}}})}));
    auto e = error_of([&] { build_skill(finance_digest(), *gw); });
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    EXPECT_EQ(e.details(), std::vector<std::string> {"sections[0].rules"});
}

TEST(Skill, TwoOccupationsTwoFiles)
{
    auto gw = scripted(json::array({rule("analyst", "TASK: build-skill", read_json(fixture("advisor/skill_finance.json")))}));
    auto nurse = finance_digest();
    nurse.occupation = "Registered Nurse";
    TempDir dir;
    auto p1 = write_skill(dir.path(), build_skill(finance_digest(), *gw));
    auto p2 = write_skill(dir.path(), build_skill(nurse, *gw));
    EXPECT_NE(p1, p2);
    EXPECT_TRUE(fs::exists(dir / "registered-nurse.md"));
    EXPECT_TRUE(fs::exists(dir / "financial-and-investment-analysts.json"));
    auto docs = load_skill_documents(dir.path());
    ASSERT_EQ(docs.size(), 2u);
    EXPECT_EQ(docs[1].slug, "registered-nurse");
    EXPECT_EQ(docs[1].occupation, "Registered Nurse");
}

TEST(Skill, SimulationPicksTheMatchingSkill)
{
    auto w = make_world();
    auto cfg = five_days();
    Skill s;
    s.occupation = " senior FINANCIAL advisor";
    s.trigger_scope = "advisory work";
    s.sections = {{"Gates", {{"blocker", "Fix reviewer corrections first."}}}};
    cfg.skills = {skill_document(s)};
    auto backend = std::make_shared<RecordingBackend>(five_day_rules());
    Gateway gw(backend);
    Simulation sim(w->in, cfg, gw);
    sim.run();
    EXPECT_EQ(sim.record().skill, "senior-financial-advisor");
    auto summary = read_json(w->in.run_dir / "simulation.json");
    EXPECT_FALSE(summary["no_skill_match"].get<bool>());
    EXPECT_TRUE(any_request_mentions(*backend, "work-agent", "- **[blocker]** Fix reviewer corrections first."));
    EXPECT_FALSE(any_request_mentions(*backend, "collaborator", "Fix reviewer corrections first."));

    auto w2 = make_world();
    s.occupation = "Registered Nurse";
    cfg.skills = {skill_document(s)};
    auto gw2 = scripted(five_day_rules());
    Simulation sim2(w2->in, cfg, *gw2);
    sim2.run();
    EXPECT_EQ(sim2.record().skill, "");
    EXPECT_TRUE(read_json(w2->in.run_dir / "simulation.json")["no_skill_match"].get<bool>());
}

// ---------------------------------------------------------------------------

TEST(SignTest, PublishedWinLoss)
{
    auto t = sign_test(105, 67);
    EXPECT_EQ(t.n, 172);
    EXPECT_NEAR(t.p_one_sided, 0.002, 0.0005);
    EXPECT_NEAR(t.p_two_sided, 0.005, 0.0005);
    EXPECT_EQ(t.tail_numerator, gmp_tail(172, 105).get_str());
}

TEST(SignTest, SmallCases)
{
    auto t = sign_test(7, 3);
    EXPECT_EQ(t.tail_numerator, "176");
    EXPECT_DOUBLE_EQ(t.p_one_sided, 176.0 / 1024.0);
    EXPECT_DOUBLE_EQ(t.p_two_sided, 352.0 / 1024.0);

    t = sign_test(1, 0);
    EXPECT_EQ(t.p_one_sided, 0.5);
    EXPECT_EQ(t.p_two_sided, 1.0);

    t = sign_test(2, 2);
    EXPECT_EQ(t.p_one_sided, 11.0 / 16.0);
    EXPECT_EQ(t.p_two_sided, 1.0);

    EXPECT_EQ(error_code_of([] { sign_test(0, 0); }), ErrorCode::EmptySample);
}

TEST(SignTest, AgreesWithBigIntegerOracle)
{
    for (unsigned long n = 1; n <= 200; ++n)
        for (unsigned long w = 0; w <= n; ++w) {
            auto t = sign_test(static_cast<long long>(w), static_cast<long long>(n - w));
            auto m = std::max(w, n - w);
            ASSERT_EQ(t.tail_numerator, gmp_tail(n, m).get_str()) << n << " " << w;
            ASSERT_DOUBLE_EQ(t.p_one_sided, gmp_p(n, m)) << n << " " << w;
            ASSERT_GE(t.p_two_sided, 0.0);
            ASSERT_LE(t.p_two_sided, 1.0);
        }
}

TEST(SignTest, SymmetryAndMonotonicity)
{
    for (long long a = 0; a <= 80; ++a)
        for (long long b = 0; b <= 80; ++b) {
            if (a + b == 0)
                continue;
            ASSERT_EQ(sign_test(a, b).p_two_sided, sign_test(b, a).p_two_sided);
        }
    for (long long n = 1; n <= 200; ++n) {
        double prev = 2.0;
        for (long long m = (n + 1) / 2; m <= n; ++m) {
            auto p = sign_test(m, n - m).p_one_sided;
            ASSERT_LE(p, prev) << n << " " << m;
            prev = p;
        }
    }
}

// ---------------------------------------------------------------------------

TEST(PairedCompare, HeldOutComparison)
{
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 100; ++i) {
        double base = 61.6 + ((i % 5) - 2);
        double delta = i < 79 ? 9.0 : i < 83 ? 1.5 : -1.0;
        pairs.emplace_back(base, base + delta);
    }
    auto c = paired_compare(pairs);
    EXPECT_EQ(c.pairs, 100);
    EXPECT_EQ(c.wins, 83);
    EXPECT_EQ(c.losses, 17);
    EXPECT_EQ(c.ties, 0);
    EXPECT_NEAR(c.mean_baseline, 61.6, 1e-9);
    EXPECT_NEAR(c.mean_treatment, 68.6, 1e-9);
    EXPECT_NEAR(c.mean_delta, 7.0, 1e-9);
    EXPECT_EQ(c.p_one_sided, sign_test(83, 17).p_one_sided);
    EXPECT_FALSE(c.degenerate);
    EXPECT_EQ(to_json(c)["wins"], 83);
}

TEST(PairedCompare, AllTiesAreDegenerate)
{
    auto c = paired_compare({{50, 50}, {70.5, 70.5}});
    EXPECT_EQ(c.wins + c.losses, 0);
    EXPECT_EQ(c.ties, 2);
    EXPECT_EQ(c.mean_delta, 0.0);
    EXPECT_TRUE(c.degenerate);
    EXPECT_EQ(c.p_one_sided, 1.0);
    EXPECT_EQ(c.p_two_sided, 1.0);
}

TEST(PairedCompare, RejectsBadInput)
{
    EXPECT_EQ(error_code_of([] { paired_compare({}); }), ErrorCode::EmptySample);
    auto e = error_of([] { paired_compare({{50, 60}, {101, 20}, {10, -0.5}}); });
    EXPECT_EQ(e.code(), ErrorCode::ScoreOutOfRange);
    EXPECT_EQ(e.details(), (std::vector<std::string> {"pairs[1]", "pairs[2]"}));
    EXPECT_EQ(error_code_of([] { paired_compare({{NAN, 1}}); }), ErrorCode::ScoreOutOfRange);
}

TEST(PairedCompare, RandomPairsMatchRecomputation)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> score(0.0, 100.0);
    for (int trial = 0; trial < 300; ++trial) {
        auto n = 1 + rng() % 120;
        std::vector<std::pair<double, double>> pairs;
        long double diff = 0;
        int wins = 0, losses = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double b = std::round(score(rng));
            double t = rng() % 4 == 0 ? b : std::round(score(rng));
            pairs.emplace_back(b, t);
            diff += static_cast<long double>(t) - b;
            wins += t > b;
            losses += t < b;
        }
        auto c = paired_compare(pairs);
        ASSERT_EQ(c.wins + c.losses + c.ties, c.pairs);
        ASSERT_EQ(c.wins, wins);
        ASSERT_EQ(c.losses, losses);
        ASSERT_NEAR(c.mean_delta, static_cast<double>(diff / n), 1e-9);
        ASSERT_DOUBLE_EQ(c.mean_delta, c.mean_treatment - c.mean_baseline);
        ASSERT_GE(c.p_one_sided, 0.0);
        ASSERT_LE(c.p_two_sided, 1.0);
    }
}
