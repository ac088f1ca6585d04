#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cuerank/config.hpp"
#include "cuerank/pipeline.hpp"

using namespace cuerank;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    os << content;
}

// One shared synthetic workspace per test run; seed and sizes are pinned
// because the golden files below depend on them.
struct Workspace {
    fs::path root;
    std::string bootstrap_ini;
    std::string run_ini;

    Workspace() {
        root = fs::temp_directory_path() / "cuerank_pipeline_ws";
        fs::remove_all(root);
        fs::create_directories(root);
        bootstrap_ini = (root / "bootstrap.ini").string();
        spit(bootstrap_ini,
             "[synth]\n"
             "seed = 21\n"
             "n_train = 150\n"
             "n_test = 90\n"
             "out_dir = data\n");
        RunConfig cfg = load_run_config(bootstrap_ini);
        (void)cmd_synth(cfg, RunOptions{});
        run_ini = (root / "data" / "run.ini").string();
    }
};

Workspace& workspace() {
    static Workspace ws;
    return ws;
}

} // namespace

TEST_CASE("ini parsing") {
    IniFile ini = IniFile::parse_string("# comment\n"
                                        "[alpha]\n"
                                        "key = value with spaces\n"
                                        "key2= 7\n"
                                        "; another comment\n"
                                        "[beta.gamma]\n"
                                        "key = first\n"
                                        "key = second\n");
    CHECK(ini.get("alpha", "key") == "value with spaces");
    CHECK(ini.get("alpha", "key2") == "7");
    CHECK(ini.get("beta.gamma", "key") == "second"); // last wins
    CHECK(!ini.get("alpha", "missing"));
    CHECK(!ini.get("missing", "key"));
    CHECK(ini.section_order() == std::vector<std::string>{"alpha", "beta.gamma"});

    CHECK(split_list(" a, b ,c ,, ") == std::vector<std::string>{"a", "b", "c"});

    CHECK_THROWS_AS((void)IniFile::parse_string("key = outside\n"), Error);
    CHECK_THROWS_AS((void)IniFile::parse_string("[unterminated\n"), Error);
    CHECK_THROWS_AS((void)IniFile::parse_string("[s]\nno equals sign\n"), Error);
}

TEST_CASE("default cue specs and rosters are mutually consistent") {
    auto specs = default_cue_specs();
    CHECK(specs.count("places"));
    CHECK(specs.count("labelstack"));
    CueRegistry reg = CueRegistry::with_standard_kinds();
    CHECK(specs.at("places").stacked_dim(reg) == 8192);
    CHECK(specs.at("labelstack").stacked_dim(reg) == 1295);
    CHECK(specs.at("baseline").stacked_dim(reg) == 4096);

    auto configs = default_score_configs();
    REQUIRE(configs.size() == 1);
    CHECK(configs[0].per_type.size() == kQuestionTypeCount);
    for (const auto& [type, ensemble] : configs[0].per_type) {
        CHECK_NOTHROW(ensemble.validate());
        for (const std::string& cue : ensemble.cues) CHECK(specs.count(cue));
        // Group-a region questions attach the person score.
        if (type == QuestionType::Past || type == QuestionType::Future ||
            type == QuestionType::Interesting)
            CHECK(ensemble.use_person_score);
    }
    CHECK(configs[0].per_type.at(QuestionType::ObjectAttribute)
              .cues[configs[0].per_type.at(QuestionType::ObjectAttribute).preferred_index] ==
          "color");
    CHECK(configs[0].per_type.at(QuestionType::PersonLocation)
              .cues[configs[0].per_type.at(QuestionType::PersonLocation).preferred_index] ==
          "places");
}

TEST_CASE("run config parsing errors are specific") {
    const fs::path dir = fs::temp_directory_path();
    const std::string path = (dir / "cuerank_bad.ini").string();

    SUBCASE("unknown path key") {
        spit(path, "[paths]\nnot_a_key = x\n");
        CHECK_THROWS_WITH_AS((void)load_run_config(path), doctest::Contains("not_a_key"), Error);
    }
    SUBCASE("cue model without parts") {
        spit(path, "[cue.foo]\nother = 1\n");
        CHECK_THROWS_WITH_AS((void)load_run_config(path), doctest::Contains("parts"), Error);
    }
    SUBCASE("bad region role") {
        spit(path, "[cue.foo]\nparts = somewhere:vgg_fc7\n");
        CHECK_THROWS_WITH_AS((void)load_run_config(path), doctest::Contains("role"), Error);
    }
    SUBCASE("config references unknown cue model") {
        spit(path, "[cue.foo]\nparts = whole:vgg_fc7\n"
                   "[config.main.Scene]\ncues = bar\n");
        CHECK_THROWS_WITH_AS((void)load_run_config(path), doctest::Contains("bar"), Error);
    }
    SUBCASE("preferred cue must be in the list") {
        spit(path, "[cue.foo]\nparts = whole:vgg_fc7\n"
                   "[config.main.Scene]\ncues = foo\npreferred = baz\n");
        CHECK_THROWS_AS((void)load_run_config(path), Error);
    }
    SUBCASE("bad question type in config section") {
        spit(path, "[cue.foo]\nparts = whole:vgg_fc7\n"
                   "[config.main.Banana]\ncues = foo\n");
        CHECK_THROWS_WITH_AS((void)load_run_config(path), doctest::Contains("Banana"), Error);
    }
    fs::remove(path);
}

TEST_CASE("synth writes a complete, loadable workspace") {
    Workspace& ws = workspace();
    const fs::path data = ws.root / "data";
    for (const char* name :
         {"run.ini", "embeddings.txt", "person_vocab.txt", "object_vocab.txt",
          "questions_train.tsv", "questions_test.tsv", "detections.txt", "meta.tsv",
          "selection_person.fvec", "selection_person_phrases.tsv", "selection_object.fvec",
          "selection_object_phrases.tsv"})
        CHECK(fs::exists(data / name));

    RunConfig cfg = load_run_config(ws.run_ini);
    CHECK(!cfg.feature_files.empty());
    CHECK(cfg.cue_specs.size() == 4);
    CHECK(cfg.score_configs.size() == 5); // ensemble + one single per cue
    CHECK(cfg.cca_default.regularization == doctest::Approx(0.01));
    CHECK(cfg.cca_default.components == 16);

    std::vector<Question> train = load_questions(cfg.questions_train_path);
    std::vector<Question> test = load_questions(cfg.questions_test_path);
    CHECK(train.size() == 150);
    CHECK(test.size() == 90);
}

TEST_CASE("fit then eval on the synthetic workspace") {
    Workspace& ws = workspace();
    RunConfig cfg = load_run_config(ws.run_ini);

    const std::string fit_report = cmd_fit(cfg, RunOptions{});
    CHECK(fit_report.find("fitted person_select") != std::string::npos);
    CHECK(fit_report.find("fitted object_select") != std::string::npos);
    CHECK(fit_report.find("Past__syn_scene_cue") != std::string::npos);
    CHECK(fs::exists(fs::path(cfg.model_dir) / "person_select.cca"));
    CHECK(fs::exists(fs::path(cfg.model_dir) / "Past__syn_person_cue.cca"));

    RunOptions text_opt;
    const std::string table = cmd_eval(cfg, text_opt);
    CHECK(table.find("ensemble") != std::string::npos);
    CHECK(table.find("overall") != std::string::npos);
    CHECK(table.find("Past") != std::string::npos);
    CHECK(table.find("PersonAttribute") != std::string::npos);
    CHECK(table.find("ObjectAttribute") != std::string::npos);

    SUBCASE("csv format and json scores") {
        RunOptions opt;
        opt.format = TableFormat::csv;
        opt.json_scores_path = (ws.root / "scores.json").string();
        const std::string csv = cmd_eval(cfg, opt);
        CHECK(csv.find("ensemble_accuracy") != std::string::npos);
        CHECK(csv.rfind("overall,", 0) == std::string::npos); // overall is the last line
        CHECK(csv.find("\noverall,") != std::string::npos);

        nlohmann::json doc = nlohmann::json::parse(slurp(*opt.json_scores_path));
        CHECK(doc["aux_order"] == "after_main");
        REQUIRE(doc["questions"].is_array());
        REQUIRE(!doc["questions"].empty());
        const auto& first = doc["questions"][0];
        CHECK(first.contains("id"));
        CHECK(first.contains("config"));
        CHECK((first.contains("per_cue") || first.contains("skipped")));
        // 90 questions x 5 configurations, not all applicable to all types.
        CHECK(doc["questions"].size() >= 90);
    }

    SUBCASE("model file count equals configured pairs plus selection models") {
        // Past roster has 4 cues, PersonAttribute and ObjectAttribute 3 each.
        std::size_t files = 0;
        for (const auto& entry : fs::directory_iterator(cfg.model_dir)) {
            CHECK(entry.path().extension() == ".cca");
            ++files;
        }
        CHECK(files == 10 + 2);
    }

    SUBCASE("missing feature path errors name the path") {
        std::string broken = slurp(ws.run_ini);
        const std::string needle = "features_syn_scene.fvec";
        broken.replace(broken.find(needle), needle.size(), "missing_features.fvec");
        // Same directory as run.ini so the other relative paths still resolve.
        const std::string broken_ini = (ws.root / "data" / "broken.ini").string();
        spit(broken_ini, broken);
        RunConfig bcfg = load_run_config(broken_ini);
        CHECK_THROWS_WITH_AS((void)cmd_fit(bcfg, RunOptions{}),
                             doctest::Contains("missing_features.fvec"), Error);
    }

    SUBCASE("eval without models is a clear error") {
        spit((ws.root / "nofit.ini").string(),
             "[synth]\nseed = 22\nn_train = 40\nn_test = 20\nout_dir = nofit\n");
        RunConfig boot = load_run_config((ws.root / "nofit.ini").string());
        (void)cmd_synth(boot, RunOptions{});
        RunConfig cfg2 = load_run_config((ws.root / "nofit" / "run.ini").string());
        try {
            (void)cmd_eval(cfg2, RunOptions{});
            FAIL("expected missing model error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::missing_data);
            CHECK(std::string(e.what()).find("run fit first") != std::string::npos);
        }
    }
}

TEST_CASE("same seed and config reproduce model files and tables bitwise") {
    Workspace& ws = workspace();

    // A second, independent synth run with the same seed.
    spit((ws.root / "bootstrap2.ini").string(),
         "[synth]\n"
         "seed = 21\n"
         "n_train = 150\n"
         "n_test = 90\n"
         "out_dir = data2\n");
    RunConfig boot2 = load_run_config((ws.root / "bootstrap2.ini").string());
    (void)cmd_synth(boot2, RunOptions{});

    RunConfig cfg1 = load_run_config(ws.run_ini);
    RunConfig cfg2 = load_run_config((ws.root / "data2" / "run.ini").string());
    (void)cmd_fit(cfg1, RunOptions{});
    (void)cmd_fit(cfg2, RunOptions{});

    // Every model file byte-identical across the two runs.
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(cfg1.model_dir)) {
        const std::string name = entry.path().filename().string();
        const fs::path other = fs::path(cfg2.model_dir) / name;
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path().string()) == slurp(other.string()));
        ++compared;
    }
    CHECK(compared >= 10);

    // Identical tables regardless of thread count.
    RunOptions t1, t4;
    t1.threads = 1;
    t4.threads = 4;
    t1.format = t4.format = TableFormat::csv;
    const std::string a = cmd_eval(cfg1, t1);
    const std::string b = cmd_eval(cfg2, t4);
    CHECK(a == b);
}

TEST_CASE("accuracy table matches the golden files") {
    Workspace& ws = workspace();
    RunConfig cfg = load_run_config(ws.run_ini);
    if (!fs::exists(fs::path(cfg.model_dir) / "person_select.cca")) (void)cmd_fit(cfg, RunOptions{});

    RunOptions text_opt, csv_opt;
    csv_opt.format = TableFormat::csv;
    const std::string text = cmd_eval(cfg, text_opt);
    const std::string csv = cmd_eval(cfg, csv_opt);

    const std::string golden_dir = std::string(CUERANK_TEST_DIR) + "/golden";
    const std::string text_golden = golden_dir + "/synthetic_table.txt";
    const std::string csv_golden = golden_dir + "/synthetic_table.csv";
    if (!fs::exists(text_golden)) {
        // Bootstrap mode: write candidates next to the goldens and fail.
        spit(text_golden + ".candidate", text);
        spit(csv_golden + ".candidate", csv);
        FAIL("golden files missing; candidates written for review");
    }
    CHECK(text == slurp(text_golden));
    CHECK(csv == slurp(csv_golden));
}

TEST_CASE("select-regions explains person and object choices") {
    Workspace& ws = workspace();
    RunConfig cfg = load_run_config(ws.run_ini);
    if (!fs::exists(fs::path(cfg.model_dir) / "person_select.cca")) (void)cmd_fit(cfg, RunOptions{});

    // Find a Past question and its planted person box from the meta file.
    std::vector<Question> test = load_questions(cfg.questions_test_path);
    const Question* past = nullptr;
    for (const Question& q : test)
        if (q.qtype == QuestionType::Past) {
            past = &q;
            break;
        }
    REQUIRE(past != nullptr);

    std::map<std::string, std::pair<std::string, std::string>> meta;
    {
        std::ifstream is((ws.root / "data" / "meta.tsv").string());
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ss(line);
            std::string id, p, o;
            ss >> id >> p >> o;
            meta[id] = {p, o};
        }
    }
    REQUIRE(meta.count(past->id));

    const std::string& correct = past->choices[static_cast<std::size_t>(past->correct)];
    const std::string out =
        cmd_select_regions(cfg, RunOptions{}, past->image_id(), correct);
    CHECK(out.find("person phrase") != std::string::npos);
    CHECK(out.find("object phrase") != std::string::npos);
    CHECK(out.find("detection:" + meta[past->id].first) != std::string::npos);
    CHECK(out.find("detection:" + meta[past->id].second) != std::string::npos);

    SUBCASE("no person words selects all person boxes") {
        const std::string notice =
            cmd_select_regions(cfg, RunOptions{}, past->image_id(), "is nothing here");
        CHECK(notice.find("all person boxes are selected") != std::string::npos);
    }
    SUBCASE("unknown image id is an error") {
        CHECK_THROWS_WITH_AS(
            (void)cmd_select_regions(cfg, RunOptions{}, "missing_image", "the girl"),
            doctest::Contains("unknown image id"), Error);
    }
}

TEST_CASE("model files can be inspected") {
    Workspace& ws = workspace();
    RunConfig cfg = load_run_config(ws.run_ini);
    if (!fs::exists(fs::path(cfg.model_dir) / "person_select.cca")) (void)cmd_fit(cfg, RunOptions{});
    const std::string report =
        cmd_inspect_model((fs::path(cfg.model_dir) / "person_select.cca").string());
    CHECK(report.find("dim_x=48") != std::string::npos);
    CHECK(report.find("dim_y=300") != std::string::npos);
    CHECK(report.find("top correlations") != std::string::npos);
}

TEST_CASE("cli binary drives the same pipeline") {
    Workspace& ws = workspace();
    const fs::path dir = ws.root / "cli";
    fs::create_directories(dir);
    spit((dir / "boot.ini").string(),
         "[synth]\nseed = 33\nn_train = 60\nn_test = 30\nout_dir = out\n");

    auto run = [&dir](const std::string& args) {
        const std::string out_path = (dir / "stdout.txt").string();
        const std::string err_path = (dir / "stderr.txt").string();
        const std::string cmd = std::string(CUERANK_CLI_PATH) + " " + args + " > " + out_path +
                                " 2> " + err_path;
        const int code = std::system(cmd.c_str());
        return std::tuple<int, std::string, std::string>(code, slurp(out_path), slurp(err_path));
    };

    auto [synth_code, synth_out, synth_err] =
        run("synth --config " + (dir / "boot.ini").string());
    CHECK(synth_code == 0);
    CHECK(synth_out.find("synthetic dataset written") != std::string::npos);
    CHECK(synth_err.empty());

    const std::string run_ini = (dir / "out" / "run.ini").string();
    auto [fit_code, fit_out, fit_err] = run("fit --config " + run_ini);
    CHECK(fit_code == 0);
    CHECK(fit_out.find("fitted") != std::string::npos);

    auto [eval_code, eval_out, eval_err] = run("eval --config " + run_ini + " --format csv");
    CHECK(eval_code == 0);
    CHECK(eval_out.find("ensemble_accuracy") != std::string::npos);

    // The CLI output matches the library call exactly.
    RunConfig cfg = load_run_config(run_ini);
    RunOptions opt;
    opt.format = TableFormat::csv;
    CHECK(eval_out == cmd_eval(cfg, opt));

    auto [inspect_code, inspect_out, inspect_err] =
        run("inspect-model " + (dir / "out" / "models" / "person_select.cca").string());
    CHECK(inspect_code == 0);
    CHECK(inspect_out.find("top correlations") != std::string::npos);

    auto [bad_code, bad_out, bad_err] = run("eval --config /nonexistent.ini");
    CHECK(bad_code != 0);
    CHECK(bad_err.find("error:") != std::string::npos);

    auto [noconf_code, noconf_out, noconf_err] = run("fit");
    CHECK(noconf_code != 0);
    CHECK(noconf_err.find("--config") != std::string::npos);
}
