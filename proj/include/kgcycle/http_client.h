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

// Minimal GET-only HTTP clients: live, fixture-backed and recording.
//
// A fixture directory holds index.tsv with one "url<TAB>status<TAB>file"
// line per recorded exchange; the body is stored in `file` next to it.

#ifndef KGCYCLE_HTTP_CLIENT_H_
#define KGCYCLE_HTTP_CLIENT_H_

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "kgcycle/util.h"

namespace kgcycle {

// Transport failure: no response was obtained at all.
class HttpError : public Error {
 public:
  using Error::Error;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpClient {
 public:
  virtual ~HttpClient() = default;
  virtual HttpResponse Get(const std::string &url) = 0;
};

// Percent-encodes everything outside the RFC 3986 unreserved set.
std::string UrlEncode(std::string_view s);

// Joins a base URL and already-encoded query parameters.
std::string BuildUrl(const std::string &base,
                     const std::vector<std::pair<std::string, std::string>> &params);

class LiveHttpClient : public HttpClient {
 public:
  explicit LiveHttpClient(double timeout_seconds = 30.0,
                          std::string user_agent = "kgcycle-crawler/1.0");
  HttpResponse Get(const std::string &url) override;

 private:
  double timeout_seconds_;
  std::string user_agent_;
};

// Replays recorded exchanges. Unknown URLs raise HttpError.
class FixtureHttpClient : public HttpClient {
 public:
  explicit FixtureHttpClient(const std::string &dir);
  HttpResponse Get(const std::string &url) override;

  size_t size() const { return responses_.size(); }

 private:
  std::map<std::string, HttpResponse> responses_;
};

// Forwards to `inner` and records every exchange into a fixture directory.
class RecordingHttpClient : public HttpClient {
 public:
  RecordingHttpClient(std::unique_ptr<HttpClient> inner, std::string dir);
  HttpResponse Get(const std::string &url) override;

 private:
  std::unique_ptr<HttpClient> inner_;
  std::string dir_;
  size_t count_ = 0;
};

}  // namespace kgcycle

#endif  // KGCYCLE_HTTP_CLIENT_H_
