// Copyright 2026 The Bracelet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP face of the tag service: /v1/cases, /v1/infected, /v1/check.

#ifndef BRACELET_HTTP_SERVICE_HPP_
#define BRACELET_HTTP_SERVICE_HPP_

#include <cstdint>
#include <string>

#include "bracelet/cloud.hpp"
#include "bracelet/error.hpp"

#include "httplib.h"
#include "json.hpp"

namespace bracelet {

inline int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateUpload: return 409;
    case ErrorCode::kOversizeRequest: return 413;
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

inline void register_routes(httplib::Server& server, TagService& service) {
  auto respond_json = [](httplib::Response& res, const nlohmann::ordered_json& body,
                         int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };

  auto respond_error = [respond_json](httplib::Response& res, const Error& e) {
    respond_json(res,
                 nlohmann::ordered_json{{"error", error_code_name(e.code())},
                                        {"message", e.what()}},
                 http_status_for(e.code()));
  };

  server.Post("/v1/cases", [&service, respond_json, respond_error](
                               const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        throw Error(ErrorCode::kMalformedRequest, "body is not valid JSON");
      }
      respond_json(res, service.handle_upload(body));
    } catch (const Error& e) {
      respond_error(res, e);
    }
  });

  server.Get("/v1/infected", [&service, respond_json, respond_error](
                                 const httplib::Request& req, httplib::Response& res) {
    try {
      std::uint64_t cursor = 0;
      if (req.has_param("cursor")) {
        const std::string raw = req.get_param_value("cursor");
        try {
          std::size_t used = 0;
          cursor = std::stoull(raw, &used);
          if (used != raw.size()) throw std::invalid_argument(raw);
        } catch (const std::exception&) {
          throw Error(ErrorCode::kMalformedRequest, "cursor must be a non-negative integer");
        }
      }
      respond_json(res, service.handle_fetch(cursor));
    } catch (const Error& e) {
      respond_error(res, e);
    }
  });

  server.Post("/v1/check", [&service, respond_json, respond_error](
                               const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        throw Error(ErrorCode::kMalformedRequest, "body is not valid JSON");
      }
      respond_json(res, service.handle_check(body));
    } catch (const Error& e) {
      respond_error(res, e);
    }
  });
}

}  // namespace bracelet

#endif  // BRACELET_HTTP_SERVICE_HPP_
