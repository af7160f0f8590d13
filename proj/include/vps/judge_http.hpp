#pragma once

// Judge transport for OpenAI-compatible chat completion endpoints.

#include "vps/judge.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <string>

namespace vps {

struct HttpJudgeConfig {
  std::string name;
  std::string base_url;  // scheme://host[:port], e.g. http://localhost:8000
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;  // variable holding the bearer token; may be empty
  int timeout_s = 60;
  int top_logprobs = 5;
};

/// Locates the score digit in a chat completion with token logprobs and
/// returns p(1..5) at that position. The digit is the first one following the
/// "score" key in the message content.
inline std::optional<std::array<double, 5>> score_token_probs(const nlohmann::json& choice) {
  if (!choice.contains("logprobs") || choice["logprobs"].is_null()) return std::nullopt;
  const auto& lp = choice["logprobs"];
  if (!lp.contains("content") || !lp["content"].is_array()) return std::nullopt;
  const std::string content = choice.at("message").value("content", std::string());
  const auto key = content.find("score");
  if (key == std::string::npos) return std::nullopt;
  const auto digit = content.find_first_of("12345", key);
  if (digit == std::string::npos) return std::nullopt;

  std::size_t offset = 0;
  for (const auto& tok : lp["content"]) {
    const std::string text = tok.value("token", std::string());
    if (offset + text.size() > digit) {
      std::array<double, 5> p{};
      bool any = false;
      auto take = [&](const nlohmann::json& alt) {
        std::string t = alt.value("token", std::string());
        while (!t.empty() && t.front() == ' ') t.erase(t.begin());
        if (t.size() == 1 && t[0] >= '1' && t[0] <= '5') {
          p[t[0] - '1'] += std::exp(alt.value("logprob", -1e9));
          any = true;
        }
      };
      if (tok.contains("top_logprobs"))
        for (const auto& alt : tok["top_logprobs"]) take(alt);
      if (!any) take(tok);
      if (!any) return std::nullopt;
      return p;
    }
    offset += text.size();
  }
  return std::nullopt;
}

class HttpTransport : public JudgeTransport {
 public:
  explicit HttpTransport(HttpJudgeConfig cfg) : cfg_(std::move(cfg)) {}

  std::string name() const override { return cfg_.name.empty() ? cfg_.model : cfg_.name; }

  JudgeResponse complete(const JudgeRequest& req) override {
    httplib::Client cli(cfg_.base_url);
    cli.set_connection_timeout(cfg_.timeout_s);
    cli.set_read_timeout(cfg_.timeout_s);
    httplib::Headers headers;
    if (!cfg_.api_key_env.empty())
      if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);

    nlohmann::json body = {{"model", cfg_.model},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
                           {"temperature", 0},
                           {"logprobs", true},
                           {"top_logprobs", cfg_.top_logprobs}};
    auto res = cli.Post(cfg_.path, headers, body.dump(), "application/json");
    if (!res) throw JudgeError("judge request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw JudgeError("judge returned HTTP " + std::to_string(res->status));

    const auto j = nlohmann::json::parse(res->body);
    const auto& choice = j.at("choices").at(0);
    JudgeResponse out;
    out.raw = choice.at("message").value("content", std::string());
    out.parsed = parse_score_text(out.raw);
    out.probs = score_token_probs(choice);
    return out;
  }

 private:
  HttpJudgeConfig cfg_;
};

}  // namespace vps
