// Copyright (c) 2026 The redforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scripted protocol v1 plugin wrapping the builtin providers. Flags inject
// the failure modes the bridge has to survive.

#include <CLI11.hpp>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "redforge/bridge.hpp"

namespace bridge = redforge::bridge;
using redforge::Json;

namespace {

[[noreturn]] void hang() {
  for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

void drain_stdin() {
  std::string line;
  while (std::getline(std::cin, line)) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fake protocol v1 plugin"};
  std::string caps;
  int version = bridge::kProtocolVersion;
  bool empty_caps = false, garbage = false, no_handshake = false, hang_calls = false;
  bool wrong_dim = false, mos_out_of_range = false;
  std::string die_once;
  int die_on_request = 0;
  app.add_option("--caps", caps, "Comma-separated capabilities");
  app.add_option("--version", version, "Protocol version to announce");
  app.add_flag("--empty-caps", empty_caps, "Announce no capabilities");
  app.add_flag("--garbage", garbage, "Print a non-JSON handshake");
  app.add_flag("--no-handshake", no_handshake, "Never send the handshake");
  app.add_flag("--hang", hang_calls, "Never answer a request");
  app.add_option("--die-once", die_once, "Exit on the first request unless FILE exists (creates it)");
  app.add_option("--die-on-request", die_on_request, "Exit on the N-th request of every process");
  app.add_flag("--wrong-dim", wrong_dim, "Announce an embedding_dim the results do not have");
  app.add_flag("--mos-out-of-range", mos_out_of_range, "Answer mos with 7.5");
  CLI11_PARSE(app, argc, argv);

  std::cerr << "fake_plugin starting\n";
  if (no_handshake) {
    drain_stdin();
    return 0;
  }
  if (garbage) {
    std::cout << "hello, this is not json\n" << std::flush;
    drain_stdin();
    return 0;
  }

  bridge::BuiltinProvider provider;
  bridge::Handshake declared;
  if (caps.empty()) {
    declared = provider.handshake();
  } else {
    std::stringstream ss(caps);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto c = bridge::parse_capability(item);
      if (!c) {
        std::cerr << "unknown capability " << item << '\n';
        return 1;
      }
      declared.capabilities.push_back(*c);
    }
    if (declared.has(bridge::Capability::kEmbed)) declared.embedding_dim = provider.handshake().embedding_dim;
    if (declared.has(bridge::Capability::kVad)) declared.vad_frame_shift = provider.handshake().vad_frame_shift;
  }
  redforge::OrderedJson hs = declared.to_json();
  hs["protocol_version"] = version;
  if (empty_caps) hs["capabilities"] = redforge::OrderedJson::array();
  if (wrong_dim && declared.has(bridge::Capability::kEmbed)) hs["embedding_dim"] = 7;
  std::cout << hs.dump() << '\n' << std::flush;

  std::string line;
  int n = 0;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    ++n;
    if (die_on_request > 0 && n == die_on_request) _exit(3);
    if (!die_once.empty() && !std::filesystem::exists(die_once)) {
      std::ofstream(die_once) << "died\n";
      _exit(3);
    }
    if (hang_calls) hang();
    auto resp = bridge::handle_request(provider, declared, line);
    if (!resp) return 0;
    if (mos_out_of_range) {
      Json j = Json::parse(*resp);
      if (j.value("ok", false) && j["result"].contains("mos")) {
        j["result"]["mos"] = 7.5;
        *resp = j.dump();
      }
    }
    std::cout << *resp << '\n' << std::flush;
  }
  return 0;
}
