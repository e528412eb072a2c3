#pragma once

#include <string>
#include <vector>

namespace searchforge::prompts {

// The canonical agent system message: think/tool_call/tool_response/answer
// tag protocol plus the four tool declarations. Tag names and the tool-call
// JSON shape downstream code parses against come from here.
extern const std::string kSystemMessage;

// User-turn prefix; the question text is appended after "Question: ".
extern const std::string kUserQuestionPrefix;

// Judge prompts: the judge must reply with exactly "Yes" or "No".
extern const std::string kJudgeSystemMessage;
extern const std::string kJudgeUserTemplate;  // {question} {ground_truth_answer} {candidate_answers} {model_response}

// QA generation template with {TEXT_SUMMARIES} / {OTHER_IMAGE_CAPTIONS}
// slots; "{{" / "}}" escape to literal braces when rendered.
extern const std::string kQaGenerationTemplate;

std::string render_user_question(const std::string& question_text);

std::string render_judge_prompt(const std::string& question,
                                const std::string& ground_truth_answer,
                                const std::vector<std::string>& candidate_answers,
                                const std::string& model_response);

// Evidence lists render as "- item" lines; empty lists render as "None".
std::string render_qa_generation_prompt(const std::vector<std::string>& text_summaries,
                                        const std::vector<std::string>& image_captions);

}  // namespace searchforge::prompts
