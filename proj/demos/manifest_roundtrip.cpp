// Runs the CLI in-process and reads back the hazard table it wrote.
#include <filesystem>
#include <iostream>

#include "pehaz/cli.hpp"

int main()
{
    namespace fs = std::filesystem;
    const auto out = fs::temp_directory_path() / "pehaz_demo_glm";
    const std::string input = PEHAZ_SOURCE_DIR "/data/navrongo_sample.csv";
    const char* argv[] = {"pehaz_cli", "fit-glm", "--input", input.c_str(), "--out-dir", out.c_str()};
    if (const int code = pehaz::cli::run(6, argv); code != 0) return code;

    const auto manifest = nlohmann::json::parse(pehaz::io::read_file(out / "manifest.json"));
    std::cout << "run_id " << manifest["run_id"].get<std::string>() << "\n";
    for (auto const& bin : pehaz::report::parse_hazard_csv(pehaz::io::read_file(out / "hazard.csv")))
        std::cout << bin.estimate << (bin.boundary ? "  (no events)" : "") << "\n";
}
