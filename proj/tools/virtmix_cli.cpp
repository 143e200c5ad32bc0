// virtmix command-line front end.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "virtmix/scenarios.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;

struct Flags {
    std::string config;
    std::string out = "out";
    int threads = 1;
    int cutoff = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

json load_config(const std::string& path) {
    if (path.empty()) throw virtmix::ValidationError("no config file given (use --config PATH)");
    std::ifstream in(path);
    if (!in) throw virtmix::ValidationError("cannot open config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw virtmix::ValidationError("config '" + path + "' is not valid JSON: " + e.what());
    }
}

void write_outputs(const fs::path& dir, const virtmix::Outputs& out, const json& manifest) {
    fs::create_directories(dir);
    for (const auto& [name, content] : out.files) {
        std::ofstream f(dir / name, std::ios::binary);
        f << content;
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    }
    std::ofstream m(dir / "manifest.json", std::ios::binary);
    m << manifest.dump(2) << "\n";
}

int run_task(virtmix::Task task, const Flags& fl) {
    const auto t0 = std::chrono::steady_clock::now();
    const json cfg = load_config(fl.config);
    virtmix::RunOptions opt;
    opt.threads = std::max(1, fl.threads);
    if (fl.cutoff > 0) opt.cutoff = fl.cutoff;
    if (fl.seed_set) opt.seed = fl.seed;
    for (const auto& w : virtmix::config::validate_config(cfg).warnings) std::cerr << "warning: " << w << "\n";
    const auto out = virtmix::execute(cfg, task, opt);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json echo = cfg;
    echo["resolved"] = {{"threads", opt.threads}};
    if (opt.cutoff) echo["resolved"]["fock_cutoff"] = *opt.cutoff;
    if (opt.seed) echo["resolved"]["seed"] = *opt.seed;
    write_outputs(fl.out, out, virtmix::manifest(echo, out, wall));
    for (const auto& [name, content] : out.files) std::cout << (fs::path(fl.out) / name).string() << "\n";
    return 0;
}

int validate(const Flags& fl) {
    const json cfg = load_config(fl.config);
    const auto d = virtmix::config::validate_config(cfg);
    for (const auto& e : d.errors) std::cerr << "error: " << e << "\n";
    for (const auto& w : d.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << (d.ok() ? "valid" : "invalid") << " (" << d.errors.size() << " errors, " << d.warnings.size() << " warnings)\n";
    return d.ok() ? 0 : exit_validation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"virtmix: virtual-photon multi-qubit mixing in ultrastrong cavity QED"};
    app.set_version_flag("--version", virtmix::version);
    app.require_subcommand(1);
    Flags fl;

    auto common = [&](CLI::App* sub, bool positional) {
        if (positional)
            sub->add_option("config_file", fl.config, "run configuration (JSON)");
        sub->add_option("--config", fl.config, "run configuration (JSON)");
        sub->add_option("--out", fl.out, "output directory")->capture_default_str();
        sub->add_option("--threads", fl.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
        sub->add_option("--cutoff", fl.cutoff, "override system.fock_cutoff")->check(CLI::PositiveNumber);
        sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { fl.seed = s, fl.seed_set = true; },
                                                "override the ECC random seed");
    };

    const std::vector<std::tuple<const char*, const char*, virtmix::Task>> tasks{
        {"run", "run every task in the config", virtmix::Task::run},
        {"levels", "parameter sweep of the dressed levels (levels.csv)", virtmix::Task::levels},
        {"anticross", "locate an avoided crossing (anticrossing.json)", virtmix::Task::anticross},
        {"perturb", "perturbative path sum (perturbation.json)", virtmix::Task::perturb},
        {"dynamics", "master-equation run (dynamics.csv, dynamics.json)", virtmix::Task::dynamics},
        {"ecc", "error-correction suite (ecc.json)", virtmix::Task::ecc},
    };
    std::optional<virtmix::Task> chosen;
    for (const auto& [name, help, task] : tasks) {
        auto* sub = app.add_subcommand(name, help);
        common(sub, true);
        sub->callback([&chosen, t = task] { chosen = t; });
    }
    auto* val = app.add_subcommand("validate", "schema and physics checks");
    common(val, true);
    std::string preset_name;
    auto* pre = app.add_subcommand("preset", "print the preset config of a scenario");
    pre->add_option("scenario", preset_name, "scenario tag")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_validation;
    }

    try {
        if (*pre) {
            std::cout << virtmix::preset(preset_name).dump(2) << "\n";
            return 0;
        }
        if (*val) return validate(fl);
        return run_task(*chosen, fl);
    } catch (const virtmix::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == virtmix::ErrorKind::validation ? exit_validation : exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
