// Copyright 2026 The kgcycle Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kgcycle/http_client.h"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace kgcycle {
namespace fs = std::filesystem;

std::string UrlEncode(std::string_view s) {
  static const char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

std::string BuildUrl(const std::string &base,
                     const std::vector<std::pair<std::string, std::string>> &params) {
  std::string url = base;
  char sep = base.find('?') == std::string::npos ? '?' : '&';
  for (const auto &[key, value] : params) {
    url += sep;
    url += UrlEncode(key) + "=" + UrlEncode(value);
    sep = '&';
  }
  return url;
}

LiveHttpClient::LiveHttpClient(double timeout_seconds, std::string user_agent)
    : timeout_seconds_(timeout_seconds), user_agent_(std::move(user_agent)) {}

HttpResponse LiveHttpClient::Get(const std::string &url) {
  const size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw HttpError("not an absolute URL: " + url);
  const size_t path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string target = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  const auto seconds = static_cast<time_t>(timeout_seconds_);
  const auto micros = static_cast<time_t>((timeout_seconds_ - seconds) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_follow_location(true);
  auto result = client.Get(target, {{"User-Agent", user_agent_},
                                    {"Accept", "application/json"}});
  if (!result) {
    throw HttpError("GET " + url + ": " + httplib::to_string(result.error()));
  }
  return {result->status, result->body};
}

FixtureHttpClient::FixtureHttpClient(const std::string &dir) {
  const fs::path index = fs::path(dir) / "index.tsv";
  if (!fs::exists(index)) throw HttpError("fixture index not found: " + index.string());
  size_t line_no = 0;
  for (const auto &line : ReadLines(index.string())) {
    ++line_no;
    if (IsBlank(line) || line[0] == '#') continue;
    const auto cols = Split(line, '\t');
    if (cols.size() != 3) {
      throw HttpError(index.string() + ":" + std::to_string(line_no) +
                      ": expected url, status and file");
    }
    HttpResponse response;
    try {
      response.status = std::stoi(cols[1]);
    } catch (const std::exception &) {
      throw HttpError(index.string() + ":" + std::to_string(line_no) + ": bad status");
    }
    response.body = ReadFile((fs::path(dir) / cols[2]).string());
    responses_[cols[0]] = std::move(response);
  }
}

HttpResponse FixtureHttpClient::Get(const std::string &url) {
  auto it = responses_.find(url);
  if (it == responses_.end()) throw HttpError("no recorded response for " + url);
  return it->second;
}

RecordingHttpClient::RecordingHttpClient(std::unique_ptr<HttpClient> inner, std::string dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  fs::create_directories(dir_);
  const fs::path index = fs::path(dir_) / "index.tsv";
  if (fs::exists(index)) count_ = ReadLines(index.string()).size();
}

HttpResponse RecordingHttpClient::Get(const std::string &url) {
  HttpResponse response = inner_->Get(url);
  char name[32];
  std::snprintf(name, sizeof(name), "%06zu.body", count_++);
  WriteFile((fs::path(dir_) / name).string(), response.body);
  std::ofstream index(fs::path(dir_) / "index.tsv", std::ios::app | std::ios::binary);
  index << url << '\t' << response.status << '\t' << name << '\n';
  return response;
}

}  // namespace kgcycle
