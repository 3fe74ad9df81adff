#include <doctest.h>

#include <json.hpp>

#include "support.hpp"
#include "tb/error.hpp"
#include "tb/rng.hpp"

using namespace tb;

namespace {

const char* kParticipants =
    "id,gender,age,text_file,chicken,box,door\n"
    "p1,male,30,t1.txt,Speed,Left,B\n"
    "p2,female,22,t2.txt,Stop,Left,A\n"
    "p3,female,41,t3.txt,Speed,Right,B\n"
    "p4,other,35,t4.txt,Speed,Left,C\n";

const char* kAttributes =
    "id,calm,bold\n"
    "p3,0.5,0.25\n"
    "p1,0,1\n"
    "p4,1,0.75\n"
    "p2,0.2,0.4\n";

std::string judgment(const std::string& worker, const std::string& text, const std::string& attr, int score, bool test = false,
                     int lo = 0, int hi = 0)
{
    std::string row = worker + "," + text + "," + attr + "," + std::to_string(score) + "," + (test ? "1" : "0") + ",";
    if (test) row += std::to_string(lo) + "," + std::to_string(hi);
    else row += ",";
    return row + "\n";
}

}  // namespace

TEST_SUITE("dataset")
{
    TEST_CASE("load and reorder attributes")
    {
        const auto ds = parse_dataset(kParticipants, std::string_view(kAttributes));
        REQUIRE(ds.size() == 4);
        CHECK(ds.participants[3].gender == Gender::unspecified);
        CHECK(ds.participants[1].choices == std::vector<ActionIndex>{1, 0, 0});
        CHECK(ds.attribute_names == std::vector<std::string>{"calm", "bold"});
        REQUIRE(ds.attributes);
        CHECK((*ds.attributes)(0, 1) == 1.0);  // p1
        CHECK((*ds.attributes)(2, 0) == 0.5);  // p3
        CHECK(ds.labels(2) == std::vector<ActionIndex>{1, 0, 1, 2});
    }

    TEST_CASE("raw scale")
    {
        const char* raw = "id,calm\np1,5\np2,0\np3,2\np4,3\n";
        LoadOptions opts;
        opts.raw_scale = true;
        const auto ds = parse_dataset(kParticipants, std::string_view(raw), opts);
        CHECK((*ds.attributes)(2, 0) == doctest::Approx(0.4));
        CHECK_THROWS_AS(parse_dataset(kParticipants, std::string_view(raw)), ValidationError);
    }

    TEST_CASE("schema and validation errors name the culprit")
    {
        CHECK_THROWS_AS(parse_dataset(""), SchemaError);
        CHECK_THROWS_AS(parse_dataset("id,gender,age,text_file,chicken,box,door\n"), SchemaError);
        try {
            parse_dataset("id,gender,age,text_file,chicken,box\np1,male,3,t,Speed,Left\n");
            FAIL("expected a schema error");
        } catch (const SchemaError& e) {
            CHECK(std::string(e.what()).find("door") != std::string::npos);
        }
        try {
            parse_dataset("id,gender,age,text_file,chicken,box,door\np1,male,3,t,Speed,Up,A\n");
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("p1") != std::string::npos);
            CHECK(msg.find("box") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_dataset("id,gender,age,text_file,chicken,box,door\np1,m,3,t,Speed,Left,A\np1,f,4,t,Stop,Left,A\n"),
                        ValidationError);
        CHECK_THROWS_AS(parse_dataset(kParticipants, std::string_view("id,calm\np1,0.5\np2,0.5\np3,0.5\n")), ValidationError);
        CHECK_THROWS_AS(parse_dataset(kParticipants, std::string_view("id,calm\np1,0.5\np2,0.5\np3,0.5\np4,1.5\n")), ValidationError);
    }

    TEST_CASE("load from files reports the real path")
    {
        const auto dir = tbt::temp_dir("dataset_files");
        tbt::write_file(dir / "people.csv", "id,gender,age\np1,male,3\n");
        try {
            load_dataset(dir / "people.csv");
            FAIL("expected a schema error");
        } catch (const SchemaError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("people.csv") != std::string::npos);
            CHECK(msg.find("text_file") != std::string::npos);
        }
        tbt::write_file(dir / "participants.csv", kParticipants);
        const auto ds = load_dataset(dir / "participants.csv");
        CHECK(ds.text_root == dir);
        write_participants_csv(ds, dir / "copy.csv");
        const auto again = load_dataset(dir / "copy.csv");
        REQUIRE(again.size() == ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            CHECK(again.participants[i].id == ds.participants[i].id);
            CHECK(again.participants[i].choices == ds.participants[i].choices);
            CHECK(again.participants[i].age == ds.participants[i].age);
        }
    }

    TEST_CASE("summary")
    {
        const auto ds = parse_dataset(kParticipants);
        const auto s = summarize(ds);
        CHECK(s.participants == 4);
        CHECK(s.male == 1);
        CHECK(s.female == 2);
        CHECK(s.unspecified == 1);
        CHECK(s.age.mean == doctest::Approx(32.0));
        CHECK(s.age.median == doctest::Approx(32.5));
        // sample std of 30, 22, 41, 35
        CHECK(s.age.stddev == doctest::Approx(std::sqrt((4.0 + 100.0 + 81.0 + 9.0) / 3.0)));
        REQUIRE(s.games.size() == 3);
        CHECK(s.games[0].counts == std::vector<std::size_t>{3, 1});
        CHECK(s.games[2].counts == std::vector<std::size_t>{1, 2, 1});
        CHECK(s.games[2].female_counts == std::vector<std::size_t>{1, 1, 0});
        for (const auto& g : s.games) {
            std::size_t total = 0;
            for (auto c : g.counts) total += c;
            CHECK(total == ds.size());
        }
        const auto doc = nlohmann::json::parse(s.to_json());
        CHECK(doc["participants"] == 4);
        CHECK(s.to_json() == summarize(ds).to_json());
    }

    TEST_CASE("summary matches the published marginals on a count-matched fixture")
    {
        std::mt19937_64 gen(1);
        const auto ds = tbt::make_dataset({tbt::labels_with_counts({156, 115}, gen), tbt::labels_with_counts({187, 84}, gen),
                                           tbt::labels_with_counts({88, 117, 66}, gen)});
        const auto s = summarize(ds);
        CHECK(s.games[0].counts == std::vector<std::size_t>{156, 115});
        CHECK(s.games[1].proportions[0] == doctest::Approx(0.69).epsilon(0.005));
        CHECK(s.games[2].counts[1] == 117);
    }

    TEST_CASE("aggregation basics")
    {
        std::string csv = "worker_id,text_id,attribute,score,is_test,lo,hi\n";
        csv += judgment("w1", "t1", "calm", 4);
        csv += judgment("w1", "t1", "bold", 1);
        csv += judgment("w1", "q", "calm", 1, true, 0, 2);
        csv += judgment("w2", "t1", "calm", 2);
        csv += judgment("w2", "t1", "bold", 3);
        csv += judgment("w2", "q", "calm", 2, true, 0, 2);  // boundary passes
        csv += judgment("w3", "t1", "calm", 5);
        csv += judgment("w3", "t1", "bold", 5);
        csv += judgment("w3", "q", "calm", 3, true, 0, 2);
        csv += judgment("w4", "t1", "calm", 0);  // no test questions
        csv += judgment("w4", "t1", "bold", 0);
        const auto agg = aggregate_judgments(parse_judgments(csv));
        CHECK(agg.report.excluded == 2);
        CHECK(agg.report.excluded_fraction() == doctest::Approx(0.5));
        CHECK(agg.attribute_names == std::vector<std::string>{"bold", "calm"});
        CHECK(agg.text_ids == std::vector<std::string>{"t1"});
        CHECK(agg.values(0, 1) == doctest::Approx(6.0 / 10.0));
        CHECK(agg.values(0, 0) == doctest::Approx(4.0 / 10.0));
        CHECK(agg.report.cells_below_required == 2);

        AggregateOptions strict;
        strict.pass_threshold = 1.01;
        CHECK_THROWS_AS(aggregate_judgments(parse_judgments(csv), strict), CoverageError);
        CHECK_THROWS_AS(parse_judgments("worker_id,text_id,attribute,score,is_test,lo,hi\nw,t,a,6,0,,\n"), ValidationError);
        CHECK_THROWS_AS(parse_judgments("worker_id,text_id,score,is_test,lo,hi\nw,t,1,0,,\n"), SchemaError);
    }

    TEST_CASE("aggregation properties")
    {
        std::mt19937_64 gen(42);
        const std::vector<std::string> attrs = {"a", "b", "c"};
        for (int trial = 0; trial < 50; ++trial) {
            // ten workers; four of them answer the test questions badly
            std::vector<WorkerJudgment> js;
            std::map<std::pair<std::string, std::string>, std::vector<int>> kept;
            for (int w = 0; w < 10; ++w) {
                const std::string id = "w" + std::to_string(w);
                const bool good = w >= 4;
                for (int q = 0; q < 5; ++q) {
                    const int score = good ? static_cast<int>(gen() % 3) : 3 + static_cast<int>(gen() % 3);
                    js.push_back({id, "gold" + std::to_string(q), "a", score, true, ScoreInterval{0, 2}});
                }
                for (int t = 0; t < 6; ++t) {
                    for (const auto& a : attrs) {
                        const int score = static_cast<int>(gen() % 6);
                        const std::string text = "t" + std::to_string(t);
                        js.push_back({id, text, a, score, false, std::nullopt});
                        if (good) kept[{text, a}].push_back(score);
                    }
                }
            }
            const auto agg = aggregate_judgments(js);
            CHECK(agg.report.excluded_fraction() == doctest::Approx(0.4));
            for (std::size_t t = 0; t < agg.text_ids.size(); ++t) {
                for (std::size_t a = 0; a < attrs.size(); ++a) {
                    const auto& scores = kept[{agg.text_ids[t], agg.attribute_names[a]}];
                    double mean = 0;
                    for (int s : scores) mean += s;
                    mean /= 5.0 * static_cast<double>(scores.size());
                    CHECK(agg.values(t, a) == doctest::Approx(mean).epsilon(1e-12));
                    CHECK(agg.values(t, a) >= 0.0);
                    CHECK(agg.values(t, a) <= 1.0);
                }
            }

            auto shuffled = js;
            std::shuffle(shuffled.begin(), shuffled.end(), gen);
            const auto again = aggregate_judgments(shuffled);
            CHECK(again.values == agg.values);
            CHECK(again.text_ids == agg.text_ids);

            // a stricter gate never lets more workers through
            std::set<std::string> prev;
            for (const double th : {0.0, 0.2, 0.4, 0.6, 0.7, 0.8, 1.0}) {
                AggregateOptions o;
                o.pass_threshold = th;
                std::set<std::string> surviving;
                for (const auto& w : aggregate_judgments(js, o).report.workers) {
                    if (w.passed) surviving.insert(w.worker_id);
                }
                if (th > 0.0) CHECK(std::includes(prev.begin(), prev.end(), surviving.begin(), surviving.end()));
                prev = surviving;
            }
        }
    }
}
