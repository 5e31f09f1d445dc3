#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "hvlab/harness/compare.hpp"
#include "hvlab/harness/selftest.hpp"

using namespace hvlab;
using namespace hvlab::harness;

namespace {

enum Exit { ok = 0, config_error = 1, numerical_error = 2, io_error = 3 };

struct Options {
    std::string config;
    std::string out;
    unsigned threads = 1;
    std::string mode;
    bool quiet = false;
};

RunConfig load(const Options& o) {
    auto c = load_config(o.config);
    if (!o.mode.empty()) c.mode = vlasov_mode_from(o.mode);
    if (!o.out.empty()) c.output_dir = o.out;
    return c;
}

void print_fits(const RateReport& r) {
    for (const auto& [name, f] : r.fits)
        std::printf("  %-14s slope %8.4f  intercept %9.4f  residual %.3g  (%zu points)\n", name.c_str(), f.slope,
                    f.intercept, f.residual, f.points);
    for (const auto& [name, msg] : r.fit_errors) std::printf("  %-14s %s\n", name.c_str(), msg.c_str());
}

int cmd_validate(const Options& o) {
    auto c = load(o);
    check_static(c);
    auto est = estimate_resources(c);
    if (!o.quiet) {
        std::printf("config %s: ok\n", o.config.c_str());
        std::printf("  largest grid M=%d, dense kernel %.3g MB, peak per point %.3g MB (limit %.3g GB)\n",
                    c.grid_M(c.N_list.back()), est.kernel_bytes / 1e6, est.peak_bytes / 1e6, c.memory_limit_gb);
    }
    if (est.peak_bytes > c.memory_limit_gb * 1e9) throw ConfigError("resource estimate exceeds resources.memory_limit_gb");
    auto h = dt_halving_check(c);
    if (!o.quiet)
        std::printf("  dt halving at N=%llu: dt=%.4g, relative HS change after t=%.4g is %.3g\n",
                    static_cast<unsigned long long>(h.N), h.dt, h.t, h.difference);
    return ok;
}

int cmd_evolve(const Options& o) {
    auto c = load(o);
    auto s = run_evolve(c, c.output_dir);
    if (!o.quiet)
        std::printf("evolved N=%llu to T=%g: %d Hartree steps, %d Vlasov steps, %d snapshots in %s\n",
                    static_cast<unsigned long long>(s.N), c.T, s.hartree_steps, s.vlasov_steps, s.snapshots,
                    c.output_dir.c_str());
    return ok;
}

int cmd_compare(const Options& o, bool sweep) {
    auto c = load(o);
    auto r = run_comparison(c, o.threads, sweep);
    emit_report(r, c.output_dir);
    if (!o.quiet) {
        std::printf("%zu rows written to %s\n", r.rows.size(), c.output_dir.c_str());
        print_fits(r);
    }
    for (const auto& e : r.errors)
        std::fprintf(stderr, "N=%llu: %s error: %s\n", static_cast<unsigned long long>(e.N), e.kind.c_str(),
                     e.message.c_str());
    return r.errors.empty() ? ok : numerical_error;
}

int cmd_selftest(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    int failed = 0;
    for (const auto& r : run_selftest()) {
        if (!r.passed) ++failed;
        if (!o.quiet || !r.passed)
            std::printf("%s  %-56s %.3g (limit %.3g)%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.value,
                        r.limit, r.message.empty() ? "" : " ", r.message.c_str());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.quiet) std::printf("selftest: %d failed, %.1f s\n", failed, secs);
    return failed ? numerical_error : ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hartree and Vlasov comparison harness"};
    app.require_subcommand(1);
    Options o;
    app.add_flag("--quiet,-q", o.quiet, "print errors only");

    auto add_common = [&](CLI::App* sub, bool runs) {
        sub->add_option("config", o.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory (overrides output_dir)");
        sub->add_option("--mode", o.mode, "Vlasov solver")->check(CLI::IsMember({"grid", "characteristics"}));
        if (runs) sub->add_option("--threads", o.threads, "sweep points run concurrently")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet,-q", o.quiet, "print errors only");
    };
    auto* validate = app.add_subcommand("validate", "static checks, resource estimate and a dt-halving run");
    add_common(validate, false);
    auto* evolve = app.add_subcommand("evolve", "single-N trajectory with snapshots");
    add_common(evolve, false);
    auto* compare = app.add_subcommand("compare", "Hartree against Vlasov at T for every N");
    add_common(compare, true);
    auto* sweep = app.add_subcommand("sweep", "all metrics at every recorded time and N");
    add_common(sweep, true);
    auto* selftest = app.add_subcommand("selftest", "exact identities on small grids");
    selftest->add_flag("--quiet,-q", o.quiet, "print failures only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return config_error;
    }

    if (!o.quiet && !*selftest) diag::set_handler([](std::string_view m) { std::cerr << "warning: " << m << "\n"; });
    try {
        if (*validate) return cmd_validate(o);
        if (*evolve) return cmd_evolve(o);
        if (*compare) return cmd_compare(o, false);
        if (*sweep) return cmd_compare(o, true);
        return cmd_selftest(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return numerical_error;
    } catch (const DataError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return numerical_error;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return io_error;
    }
}
