// Command-line entry point: one subcommand per pipeline stage.
#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "xaifn/pipeline.hpp"

using xaifn::json;

namespace {

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

// Flag text converted to the type of the option's default.
json parse_flag(const json& def, const std::string& text) {
  if (def.is_string()) return text;
  if (def.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw xaifn::Error("USAGE", "expected true or false, got \"" + text + "\"");
  }
  if (def.is_array()) {
    json arr = json::array();
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t comma = text.find(',', start);
      arr.push_back(json::parse(text.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return arr;
  }
  try {
    json v = json::parse(text);
    if (!v.is_number()) throw xaifn::Error("USAGE", "expected a number, got \"" + text + "\"");
    if (def.is_number_integer() && !v.is_number_integer()) {
      throw xaifn::Error("USAGE", "expected an integer, got \"" + text + "\"");
    }
    return v;
  } catch (const json::exception&) {
    throw xaifn::Error("USAGE", "expected a number, got \"" + text + "\"");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable fake news detection and study toolkit"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app = nullptr;
    std::string config;
    std::map<std::string, std::string> values;
  };
  std::map<std::string, Command> commands;
  for (const auto& name : xaifn::command_names()) {
    Command& c = commands[name];
    c.app = app.add_subcommand(name);
    c.app->add_option("--config", c.config, "JSON file of option values");
    const json defaults = xaifn::default_options(name);
    for (const auto& [key, def] : defaults.items()) {
      c.app->add_option(flag_name(key), c.values[key], "default: " + def.dump());
    }
  }
  std::string manifest;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (replay->parsed()) {
      xaifn::replay_manifest(manifest);
      return 0;
    }
    for (auto& [name, c] : commands) {
      if (!c.app->parsed()) continue;
      const json defaults = xaifn::default_options(name);
      const json config = c.config.empty() ? json::object() : xaifn::read_json(c.config);
      json flags = json::object();
      for (const auto& [key, text] : c.values) {
        if (c.app->count(flag_name(key)) > 0) flags[key] = parse_flag(defaults.at(key), text);
      }
      xaifn::run_command(name, xaifn::resolve_options(name, config, flags));
    }
  } catch (const xaifn::Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return e.code() == "USAGE" ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
