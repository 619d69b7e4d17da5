// fcdata-fixture: writes the planted synthetic corpus, scripted mock backends
// and a ready-to-run pipeline config into a directory.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fcdata/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic pipeline fixture"};
    std::string dir;
    fcdata::synthetic::Options opt;
    app.add_option("dir", dir, "Output directory")->required();
    app.add_option("--incoming", opt.incoming, "Online queries, including 4 planted duplicates");
    app.add_option("--seeds-per-cell", opt.seeds_per_cell, "Seed samples per (topic, tool)");
    app.add_option("--seed", opt.seed, "Mock embedding seed");
    CLI11_PARSE(app, argc, argv);
    try {
        const auto fx = fcdata::synthetic::make_fixture(opt);
        fcdata::synthetic::write_fixture(fx, dir);
        std::cout << fcdata::json{{"seed_samples", fx.seed.size()},
                                  {"incoming", fx.incoming.size()},
                                  {"planted_duplicates", fx.planted_duplicates},
                                  {"expected_consistent", fx.expected_consistent},
                                  {"expected_inconsistent", fx.expected_inconsistent},
                                  {"planted_blind_spots", fx.planted.size()}}
                         .dump()
                  << "\n";
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
