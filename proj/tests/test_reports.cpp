#include "morfi/reports.hpp"

#include "morfi/records_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

#include <sys/stat.h>
#include <unistd.h>

using namespace morfi;

namespace {

std::string temp_path(const std::string& name) {
    static const std::string dir = [] {
        std::string d = "/tmp/morfi_reports_" + std::to_string(::getpid());
        ::mkdir(d.c_str(), 0755);
        return d;
    }();
    return dir + "/" + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

MonotonicLatents sample_ranking() {
    MonotonicLatents m;
    m.increasing.direction = TrendDirection::increasing;
    m.increasing.entries.push_back({4, 1.0, 0.5, 0.25, 1.5});
    m.increasing.entries.push_back({2, 0.5, -1.0, 0.0, -2.0});
    m.decreasing.direction = TrendDirection::decreasing;
    m.decreasing.entries.push_back({9, 0.75, -0.5, -0.25, -1.5});
    return m;
}

} // namespace

TEST_CASE("format_double emits shortest round-trip decimals") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(-0.25) == "-0.25");
    CHECK(format_double(2.0 / 3.0) == "0.6666666666666666");
    CHECK(std::stod(format_double(0.1)) == 0.1);
    for (double v : {1e-300, 3.141592653589793, -7.25e20, 1234.5678}) {
        CAPTURE(v);
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("ranked CSV bytes are exactly specified") {
    const auto path = temp_path("ranked.csv");
    write_ranked_csv(path, sample_ranking());
    CHECK(slurp(path) ==
          "rank,direction,latent,frequency,mean_rho,mean_tau,mean_delta\n"
          "1,increasing,4,1,0.5,0.25,1.5\n"
          "2,increasing,2,0.5,-1,0,-2\n"
          "1,decreasing,9,0.75,-0.5,-0.25,-1.5\n");

    SUBCASE("empty rankings still write the header") {
        const auto empty_path = temp_path("ranked_empty.csv");
        write_ranked_csv(empty_path, MonotonicLatents{});
        CHECK(slurp(empty_path) == "rank,direction,latent,frequency,mean_rho,mean_tau,mean_delta\n");
    }
}

TEST_CASE("ranked JSON round-trips and enforces its schema") {
    const auto path = temp_path("ranked.json");
    const auto original = sample_ranking();
    write_ranked_json(path, original);
    const auto loaded = read_ranked_json(path);

    REQUIRE(loaded.increasing.entries.size() == 2);
    REQUIRE(loaded.decreasing.entries.size() == 1);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(loaded.increasing.entries[i].latent == original.increasing.entries[i].latent);
        CHECK(loaded.increasing.entries[i].frequency == original.increasing.entries[i].frequency);
        CHECK(loaded.increasing.entries[i].mean_rho == original.increasing.entries[i].mean_rho);
        CHECK(loaded.increasing.entries[i].mean_tau == original.increasing.entries[i].mean_tau);
        CHECK(loaded.increasing.entries[i].mean_delta == original.increasing.entries[i].mean_delta);
    }
    CHECK(loaded.decreasing.entries[0].latent == 9);

    SUBCASE("ranks are recorded per direction") {
        const auto doc = nlohmann::json::parse(slurp(path));
        CHECK(doc["schema_version"] == 1);
        CHECK(doc["increasing"][0]["rank"] == 1);
        CHECK(doc["increasing"][1]["rank"] == 2);
        CHECK(doc["decreasing"][0]["rank"] == 1);
    }

    SUBCASE("a foreign schema version is rejected") {
        auto doc = nlohmann::json::parse(slurp(path));
        doc["schema_version"] = 2;
        spit(path, doc.dump());
        CHECK_THROWS_AS(read_ranked_json(path), ValidationError);
    }

    SUBCASE("missing directions are rejected") {
        auto doc = nlohmann::json::parse(slurp(path));
        doc.erase("decreasing");
        spit(path, doc.dump());
        CHECK_THROWS_AS(read_ranked_json(path), ValidationError);
    }

    SUBCASE("junk files are rejected") {
        spit(path, "not json");
        CHECK_THROWS_AS(read_ranked_json(path), ValidationError);
        CHECK_THROWS_AS(read_ranked_json(temp_path("does_not_exist.json")), ValidationError);
    }
}

TEST_CASE("control reports pair latents with deltas") {
    const auto path = temp_path("control.json");
    const std::vector<Index> latents{3, 1, 7};
    const std::vector<double> deltas{0.001, -0.002, 0.004};
    write_control_json(path, latents, deltas);

    const auto doc = nlohmann::json::parse(slurp(path));
    CHECK(doc["schema_version"] == 1);
    CHECK(doc["count"] == 3);
    REQUIRE(doc["latents"].size() == 3);
    CHECK(doc["latents"][0]["latent"] == 3);
    CHECK(doc["latents"][0]["delta"] == 0.001);
    CHECK(doc["latents"][2]["latent"] == 7);

    const std::vector<double> short_deltas{0.1};
    CHECK_THROWS_AS(write_control_json(path, latents, short_deltas), ValidationError);
}

TEST_CASE("steering reports round-trip") {
    SteeringResult result;
    result.baseline = 0.31;
    result.polarity = -1;
    result.entries.push_back({17, -0.35, 0.52, 0.48});
    result.entries.push_back({4, -0.1, 0.4, 0.39});
    result.screen_log.push_back({17, 0.48});
    result.screen_log.push_back({4, 0.39});
    result.screen_log.push_back({9, 0.2});

    const auto path = temp_path("steering.json");
    write_steering_json(path, result);
    const auto loaded = read_steering_json(path);

    CHECK(loaded.baseline == result.baseline);
    CHECK(loaded.polarity == -1);
    REQUIRE(loaded.entries.size() == 2);
    CHECK(loaded.entries[0].latent == 17);
    CHECK(loaded.entries[0].signed_strength == -0.35);
    CHECK(loaded.entries[0].accuracy == 0.52);
    CHECK(loaded.entries[0].screen_accuracy == 0.48);
    REQUIRE(loaded.screen_log.size() == 3);
    CHECK(loaded.screen_log[2].latent == 9);
    CHECK(loaded.screen_log[2].accuracy == 0.2);
}

TEST_CASE("recovery reports serialize the undefined case as null") {
    RecoveryReport defined;
    defined.defined = true;
    defined.recovered_fraction = 2.0 / 3.0;
    defined.gross_gains = 3;
    defined.recovered = 2;
    defined.total = 6;
    defined.per_relation.push_back({"P17", 0.5, 10, 60});
    defined.per_relation.push_back({"P19", 1.0 / 6.0, 12, 55});

    const auto path = temp_path("recovery.json");
    write_recovery_json(path, defined);
    auto doc = nlohmann::json::parse(slurp(path));
    CHECK(doc["defined"] == true);
    CHECK(doc["recovered_fraction"].get<double>() == 2.0 / 3.0);
    CHECK(doc["gross_gains"] == 3);
    CHECK(doc["per_relation"][0]["relation"] == "P17");
    CHECK(doc["per_relation"][0]["gains"] == 10);
    CHECK(doc["per_relation"][1]["pool"] == 55);

    RecoveryReport undefined;
    write_recovery_json(path, undefined);
    doc = nlohmann::json::parse(slurp(path));
    CHECK(doc["defined"] == false);
    CHECK(doc["recovered_fraction"].is_null());

    SUBCASE("the CSV lists thresholded relations only") {
        const auto csv_path = temp_path("recovery.csv");
        write_recovery_csv(csv_path, defined);
        CHECK(slurp(csv_path) ==
              "relation,share,gains,pool\n"
              "P17,0.5,10,60\n"
              "P19,0.16666666666666666,12,55\n");
        write_recovery_csv(csv_path, undefined);
        CHECK(slurp(csv_path) == "relation,share,gains,pool\n");
    }
}

TEST_CASE("planted truth round-trips") {
    const auto path = temp_path("truth.json");
    const std::vector<Index> inc{4, 17, 33};
    const std::vector<Index> dec{9};
    write_truth_json(path, inc, dec);
    const auto loaded = read_truth_json(path);
    CHECK(loaded.increasing == inc);
    CHECK(loaded.decreasing == dec);

    SUBCASE("non-integer latents are rejected") {
        auto doc = nlohmann::json::parse(slurp(path));
        doc["increasing"][1] = "17";
        spit(path, doc.dump());
        CHECK_THROWS_AS(read_truth_json(path), ValidationError);
    }
}

TEST_CASE("run manifests record the full invocation") {
    CHECK(manifest_path_for("out/scan.csv") == "out/scan.csv.manifest.json");

    RunManifest manifest;
    manifest.command = "analyze";
    manifest.config["alpha_sig"] = 0.05;
    manifest.config["replicates"] = 1000;
    manifest.inputs = {"activations.tns"};
    manifest.outputs = {"ranked.csv", "ranked.json"};
    manifest.seed = 42;
    manifest.threads = 4;
    manifest.wall_seconds = 1.25;

    const auto path = temp_path("scan.csv.manifest.json");
    write_manifest(path, manifest);
    const auto doc = nlohmann::json::parse(slurp(path));
    CHECK(doc["schema_version"] == 1);
    CHECK(doc["command"] == "analyze");
    CHECK(doc["toolkit_version"] == "0.1.0");
    CHECK(doc["config"]["alpha_sig"] == 0.05);
    CHECK(doc["config"]["replicates"] == 1000);
    CHECK(doc["seed"] == 42);
    CHECK(doc["threads"] == 4);
    CHECK(doc["inputs"] == nlohmann::json::array({"activations.tns"}));
    CHECK(doc["outputs"] == nlohmann::json::array({"ranked.csv", "ranked.json"}));
    CHECK(doc["wall_seconds"] == 1.25);

    const std::string stamp = doc["written_at"].get<std::string>();
    REQUIRE(stamp.size() == 20);
    CHECK(stamp[4] == '-');
    CHECK(stamp[7] == '-');
    CHECK(stamp[10] == 'T');
    CHECK(stamp[13] == ':');
    CHECK(stamp[16] == ':');
    CHECK(stamp[19] == 'Z');
}

TEST_CASE("QA records travel as JSON lines") {
    std::vector<QARecord> records(2);
    records[0].id = "q1";
    records[0].question = "capital of France?";
    records[0].answer = "Paris";
    records[0].relation = "P36";
    records[0].aliases = {"City of Light"};
    records[1].id = "q2";
    records[1].question = "inventor of the telephone?";
    records[1].answer = "Alexander Graham Bell";
    records[1].relation = "P61";

    const auto path = temp_path("records.jsonl");
    write_qa_records(path, records);
    const auto loaded = read_qa_records(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].id == "q1");
    CHECK(loaded[0].aliases == std::vector<std::string>{"City of Light"});
    CHECK(loaded[1].relation == "P61");
    CHECK(loaded[1].aliases.empty());

    SUBCASE("blank lines are skipped") {
        spit(path, "\n" + slurp(path) + "\n\n");
        CHECK(read_qa_records(path).size() == 2);
    }

    SUBCASE("parse errors carry the line number") {
        spit(path,
             R"({"id": "a", "question": "q", "answer": "x", "relation": "r"})"
             "\nnot json\n");
        try {
            read_qa_records(path);
            FAIL("line 2 is invalid");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find(path + ":2: ") != std::string::npos);
        }
    }

    SUBCASE("a missing relation is rejected with its line") {
        spit(path,
             R"({"id": "a", "question": "q", "answer": "x", "relation": "r"})"
             "\n"
             R"({"id": "b", "question": "q", "answer": "x"})"
             "\n");
        try {
            read_qa_records(path);
            FAIL("line 2 lacks a relation");
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            CHECK(msg.find(":2:") != std::string::npos);
            CHECK(msg.find("relation") != std::string::npos);
        }
    }

    SUBCASE("empty required fields are rejected") {
        spit(path, R"({"id": "", "question": "q", "answer": "x", "relation": "r"})" "\n");
        CHECK_THROWS_AS(read_qa_records(path), ValidationError);
    }
}

TEST_CASE("annotated records add probabilities and a category") {
    std::vector<AnnotatedRecord> records(2);
    records[0].record.id = "q1";
    records[0].record.question = "q?";
    records[0].record.answer = "a";
    records[0].record.relation = "P1";
    records[0].annotation = {0.3, 0.8125, KnowledgeCategory::maybe_known};
    records[1].record.id = "q2";
    records[1].record.question = "q?";
    records[1].record.answer = "b";
    records[1].record.relation = "P1";
    records[1].annotation = {0.0, 0.0, KnowledgeCategory::unknown};

    const auto path = temp_path("annotated.jsonl");
    write_annotated_records(path, records);
    const auto loaded = read_annotated_records(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].annotation.p_greedy == 0.3);
    CHECK(loaded[0].annotation.p_sampled == 0.8125);
    CHECK(loaded[0].annotation.category == KnowledgeCategory::maybe_known);
    CHECK(loaded[1].annotation.category == KnowledgeCategory::unknown);

    SUBCASE("the is-known label is written alongside") {
        std::istringstream lines(slurp(path));
        std::string line;
        std::getline(lines, line);
        auto doc = nlohmann::json::parse(line);
        CHECK(doc["category"] == "MaybeKnown");
        CHECK(doc["label"] == "Known");
        std::getline(lines, line);
        doc = nlohmann::json::parse(line);
        CHECK(doc["label"] == "Unknown");
    }

    SUBCASE("unknown categories are rejected with their line") {
        std::string content = slurp(path);
        const size_t pos = content.find("MaybeKnown");
        content.replace(pos, 10, "SortaKnown");
        spit(path, content);
        try {
            read_annotated_records(path);
            FAIL("the tampered category must be rejected");
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            CHECK(msg.find(":1:") != std::string::npos);
            CHECK(msg.find("SortaKnown") != std::string::npos);
        }
    }

    SUBCASE("out-of-range probabilities are rejected") {
        spit(path, R"({"id": "a", "question": "q", "answer": "x", "relation": "r",)"
                   R"( "p_greedy": 1.5, "p_sampled": 0.0, "category": "Unknown"})"
                   "\n");
        CHECK_THROWS_AS(read_annotated_records(path), ValidationError);
    }
}

TEST_CASE("correctness files accept booleans and 0/1") {
    const auto path = temp_path("correct.jsonl");
    spit(path,
         R"({"id": "q1", "correct": true, "relation": "P17"})"
         "\n"
         R"({"id": "q2", "correct": 0})"
         "\n"
         R"({"id": "q3", "correct": 1})"
         "\n");
    const auto loaded = read_correctness(path);
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].correct == 1);
    CHECK(loaded[0].relation == "P17");
    CHECK(loaded[1].correct == 0);
    CHECK(loaded[1].relation.empty());
    CHECK(loaded[2].correct == 1);

    SUBCASE("round-trips through the writer") {
        const auto out_path = temp_path("correct_rt.jsonl");
        write_correctness(out_path, loaded);
        const auto again = read_correctness(out_path);
        REQUIRE(again.size() == 3);
        for (size_t i = 0; i < 3; ++i) {
            CHECK(again[i].id == loaded[i].id);
            CHECK(again[i].correct == loaded[i].correct);
            CHECK(again[i].relation == loaded[i].relation);
        }
    }

    SUBCASE("other correct values are rejected") {
        spit(path, R"({"id": "q1", "correct": 2})" "\n");
        CHECK_THROWS_AS(read_correctness(path), ValidationError);
        spit(path, R"({"id": "q1", "correct": "yes"})" "\n");
        CHECK_THROWS_AS(read_correctness(path), ValidationError);
        spit(path, R"({"id": "q1"})" "\n");
        try {
            read_correctness(path);
            FAIL("missing correct field");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find(":1:") != std::string::npos);
        }
    }
}
