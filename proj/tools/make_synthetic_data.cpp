// Regenerates data/synthetic_imbalanced.{csv,schema.json}.
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "ctdgan/csv_io.hpp"
#include "ctdgan/synthetic.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_synthetic_data <output-dir>\n";
        return 1;
    }
    const std::filesystem::path dir = argv[1];
    const ctdgan::Dataset ds = ctdgan::make_synthetic_imbalanced(7);
    ctdgan::write_csv_file(dir / "synthetic_imbalanced.csv", ds);
    ctdgan::write_schema_file(dir / "synthetic_imbalanced.schema.json", ds.schema());
    return 0;
}
