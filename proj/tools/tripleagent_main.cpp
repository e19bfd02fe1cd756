#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tripleagent/config.hpp"
#include "tripleagent/controller.hpp"
#include "tripleagent/errors.hpp"
#include "tripleagent/report.hpp"

namespace {

using namespace tripleagent;

struct CliOptions {
  std::string config_path;
  controller::ConfigOverrides overrides;
  std::string format = "human";
};

void add_common_options(CLI::App* cmd, CliOptions& options) {
  cmd->add_option("--config", options.config_path, "Campaign configuration file")->required();
  auto* timeout = cmd->add_option("--timeout-ms", "Per-execution timeout override");
  timeout->check(CLI::PositiveNumber);
  timeout->each([&options](const std::string& value) {
    options.overrides.timeout_ms = static_cast<std::uint32_t>(std::stoul(value));
  });
  cmd->add_option_function<std::string>(
      "--filter", [&options](const std::string& value) { options.overrides.filter = value; },
      "Method-name prefix restricting detection");
  cmd->add_option_function<std::string>(
      "--out", [&options](const std::string& value) { options.overrides.out_dir = value; },
      "Output directory override");
  auto* parallel = cmd->add_option("--parallel", "Worker count (simulator backend only)");
  parallel->check(CLI::PositiveNumber);
  parallel->each([&options](const std::string& value) {
    options.overrides.parallel = static_cast<unsigned>(std::stoul(value));
  });
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

void print_detect_summary(controller::Campaign& campaign) {
  const auto& detect = campaign.detect();
  std::size_t reached = 0;
  for (const auto& point : detect.points) {
    if (detect.reaches.at(point) > 0) ++reached;
  }
  std::cout << "detected " << detect.points.size() << " perturbation points (" << reached
            << " reached, " << detect.points.size() - reached << " unreached)\n";
}

void print_classify_summary(controller::Campaign& campaign) {
  const auto& classification = campaign.classify();
  std::cout << "classified: fragile " << classification.fragile.size() << ", sensitive "
            << classification.sensitive.size() << ", immunized "
            << classification.immunized.size() << ", unreached "
            << classification.unreached.size() << "\n";
}

void print_discover_summary(controller::Campaign& campaign) {
  const auto& candidates = campaign.discover();
  std::set<model::PerturbationPoint> points;
  for (const auto& binding : candidates) points.insert(binding.point);
  std::cout << "candidates: " << candidates.size() << " bindings over " << points.size()
            << " points\n";
}

void print_assess_summary(controller::Campaign& campaign) {
  const auto& validated = campaign.assess();
  std::cout << "validated: " << validated.size() << " failure-oblivious bindings\n";
}

void emit_report(controller::Campaign& campaign, const std::string& format) {
  const report::Report rpt = report::build_report(campaign.state());
  const auto& out_dir = campaign.config().out_dir;
  write_file(out_dir / "report.json", report::render_structured(rpt));
  write_file(out_dir / "report.txt", report::render_human(rpt));
  write_file(out_dir / "matrix.csv", report::render_csv_matrix(rpt));
  if (format == "human") {
    std::cout << report::render_human(rpt);
  } else if (format == "structured") {
    std::cout << report::render_structured(rpt);
  } else {
    std::cout << report::render_csv_matrix(rpt);
  }
}

void flush_warnings(const controller::Campaign& campaign) {
  for (const auto& warning : campaign.warnings()) {
    std::cerr << "warning: " << warning << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resilience experimentation through exception injection and "
               "failure-oblivious wrappers"};
  app.require_subcommand(1);

  CliOptions options;
  CLI::App* cmd_run = app.add_subcommand("run", "Full pipeline: detect through report");
  CLI::App* cmd_detect = app.add_subcommand("detect", "Baseline run and point detection");
  CLI::App* cmd_classify = app.add_subcommand("classify", "Classify detected points");
  CLI::App* cmd_discover = app.add_subcommand("discover", "Collect candidate bindings");
  CLI::App* cmd_assess = app.add_subcommand("assess", "Assess candidate bindings");
  CLI::App* cmd_report = app.add_subcommand("report", "Render the campaign report");
  CLI::App* cmd_validate = app.add_subcommand("validate-config", "Check a configuration file");
  for (CLI::App* cmd : {cmd_run, cmd_detect, cmd_classify, cmd_discover, cmd_assess, cmd_report,
                        cmd_validate}) {
    add_common_options(cmd, options);
  }
  for (CLI::App* cmd : {cmd_run, cmd_report}) {
    cmd->add_option("--format", options.format, "Report format")
        ->check(CLI::IsMember({"human", "structured", "csv"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    controller::CampaignConfig config = controller::load_config(options.config_path);
    controller::apply_overrides(config, options.overrides);
    controller::validate_config(config);

    if (cmd_validate->parsed()) {
      std::cout << "config OK\n";
      return 0;
    }

    controller::Campaign campaign(std::move(config));
    if (cmd_detect->parsed()) {
      print_detect_summary(campaign);
    } else if (cmd_classify->parsed()) {
      print_detect_summary(campaign);
      print_classify_summary(campaign);
    } else if (cmd_discover->parsed()) {
      print_discover_summary(campaign);
    } else if (cmd_assess->parsed()) {
      print_assess_summary(campaign);
    } else if (cmd_report->parsed()) {
      emit_report(campaign, options.format);
    } else {  // run
      print_detect_summary(campaign);
      print_classify_summary(campaign);
      print_discover_summary(campaign);
      print_assess_summary(campaign);
      emit_report(campaign, options.format);
    }
    std::cout << "experiments executed this run: " << campaign.new_executions() << "\n";
    flush_warnings(campaign);
    return 0;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CampaignAbort& e) {
    std::cerr << "campaign aborted: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
