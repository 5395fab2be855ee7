// Regenerates the bundled synthetic sample panel (data/sample/fuel_panel.csv)
// from the seeded generator. The committed file must match this output; a
// test checks that.

#include "fuelshock/panel.hpp"
#include "fuelshock/params_io.hpp"
#include "fuelshock/synthetic.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    if (argc != 3) {
        std::cerr << "usage: gen_sample_panel <parameters.json> <output.csv>\n";
        return 2;
    }
    try {
        const auto params = fuelshock::load_parameters(argv[1]);
        const auto panel = fuelshock::synthetic::generate_sample_panel(params.fleet);
        fuelshock::write_panel(panel, argv[2]);
        std::cerr << "wrote " << panel.rows.size() << " rows to " << argv[2] << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
