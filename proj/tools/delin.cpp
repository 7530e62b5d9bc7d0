// delin: generate synthetic delineator datasets, fit lane models, evaluate
// them and benchmark the geometric pipeline.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "delin/commands.hpp"

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t frames = 100;
    std::string out;
    bool allow_long_extrapolation = false;
    std::optional<double> extrapolation;
    std::string course;
    std::string dataset;
    std::string models;
    std::size_t iterations = 1000;
    std::size_t warmup = 100;
};

delin::io::PipelineConfig load_config(const Options& o) {
    delin::io::PipelineConfig c;
    if (!o.config_path.empty()) {
        c = delin::io::config_from(delin::io::load_json(o.config_path));
    }
    if (!o.course.empty()) {
        const auto layout = c.course.layout;
        const int lanes = c.course.lane_count;
        c.course = delin::io::course_preset(o.course);
        c.course.layout = layout;
        c.course.lane_count = lanes;
    }
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (o.extrapolation) {
        c.extrapolation_m = *o.extrapolation;
    }
    c.allow_long_extrapolation = c.allow_long_extrapolation || o.allow_long_extrapolation;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lane geometry from roadside delineator posts"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "Pipeline configuration (JSON)");
        sub->add_option("--seed", o.seed, "Base RNG seed");
        sub->add_option("--extrapolation", o.extrapolation, "Marking extrapolation in meters");
        sub->add_flag("--allow-long-extrapolation", o.allow_long_extrapolation,
                      "Permit extrapolation beyond the 10 m cap");
    };

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset of detection frames");
    common(gen);
    gen->add_option("--frames", o.frames, "Number of frames");
    gen->add_option("--course", o.course, "Course preset: straight, arc, s-curve");
    gen->add_option("--out", o.out, "Dataset output path")->required();

    auto* fit = app.add_subcommand("fit", "Fit lane models to every dataset frame");
    common(fit);
    fit->add_option("--dataset", o.dataset, "Dataset path")->required();
    fit->add_option("--out", o.out, "Models output path")->required();

    auto* eval = app.add_subcommand("eval", "Score lane models against the dataset ground truth");
    common(eval);
    eval->add_option("--models", o.models, "Models path")->required();
    eval->add_option("--dataset", o.dataset, "Dataset path")->required();
    eval->add_option("--out", o.out, "Report output path")->required();

    auto* bench = app.add_subcommand("bench", "Time the geometric pipeline");
    common(bench);
    bench->add_option("--frames", o.frames, "Number of distinct synthetic frames");
    bench->add_option("--course", o.course, "Course preset: straight, arc, s-curve");
    bench->add_option("--iterations", o.iterations, "Timed iterations")->check(CLI::Range(1000, 100000000));
    bench->add_option("--warmup", o.warmup, "Warmup iterations")->check(CLI::Range(100, 100000000));
    bench->add_option("--out", o.out, "Optional JSON output path");

    auto* exp = app.add_subcommand("export", "Write TuSimple-style keypoints for a models file");
    common(exp);
    exp->add_option("--models", o.models, "Models path")->required();
    exp->add_option("--out", o.out, "Output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : delin::cli::kUsage;
    }

    try {
        const auto config = load_config(o);
        if (gen->parsed()) {
            return delin::cli::cmd_generate(config, o.frames, o.out, std::cout);
        }
        if (fit->parsed()) {
            return delin::cli::cmd_fit(o.dataset, config, o.out, std::cout);
        }
        if (eval->parsed()) {
            return delin::cli::cmd_eval(o.models, o.dataset, config, o.out, std::cout);
        }
        if (bench->parsed()) {
            const std::optional<std::filesystem::path> out =
                o.out.empty() ? std::nullopt : std::optional<std::filesystem::path>(o.out);
            return delin::cli::cmd_bench(config, o.frames, out, std::cout, o.iterations, o.warmup);
        }
        return delin::cli::cmd_export(o.models, config, o.out, std::cout);
    } catch (const delin::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return delin::cli::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return delin::cli::kData;
    }
}
