#include "searchforge/prompts.hpp"

namespace searchforge::prompts {

const std::string kSystemMessage = R"PROMPT(You are a helpful and harmless deep research assistant. Your task is to think carefully, seek external information when necessary, and provide accurate, well-supported answer to the user's question.

# Think guidelines
1. Reason step by step to solve the user's question. Decompose the original question into clear, manageable sub-questions.
2. After each reasoning cycle, summarize what has been established so far and decide whether additional sub-questions or external information are required.
3. Your thinking process MUST remain internal and structured within <think>...</think>.

# Tool usage guidelines
1. Use tools when external information is required to answer the question accurately.
2. Tool queries must be specific and concrete. Avoid ambiguous references or pronouns (e.g., ''it'', ''this'', ''he''), and use explicit entity names, dates, technical terms, or unique identifiers.
3. Effective tool usage depends on formulating high-quality queries and extracting useful information from tool responses.
4. Enclose all tool calls within <tool_call>...</tool_call>, and all tool outputs within <tool_response>...</tool_response>.

# Answer guidelines
1. If no external information or detailed explanation is required, always provide a concrete final answer enclosed within <answer>...</answer> (e.g., <answer>Beijing</answer>).

# Format guidelines
The assistant may follow a valid execution path as follows:
<think>reasoning</think>
(If tool usage is required)
<tool_call>tool invocation</tool_call>
<tool_response>tool output</tool_response>
(The above steps may be repeated if necessary)
<think>final reasoning</think>
<answer>final answer</answer>

# Tools
You may call one or more functions to assist with the user query.
You are provided with function signatures within <tools></tools> XML tags:
<tools>
{"type": "function", "function": {"name": "image_search_by_text_query", "description": "Searches images on the web based on the given query and returns relevant image results with their associated titles. This tool should only be used once.", "parameters": {"type": "object", "properties": {"query_list": {"type": "array", "description": "A list of fully-formed semantic queries for image search. The tool retrieves relevant images for this query."}}, "required": ["query_list"]}}}
{"type": "function", "function": {"name": "image_search_by_lens", "description": "Performs an image search using the image from the original question, refined with complementary text queries, and returns relevant images with their associated titles. This tool should only be used once.", "parameters": {"type": "object", "properties": {"query_list": {"type": "array", "description": "A list of text queries to accompany the image search. The tool retrieves relevant images for this image."}}, "required": ["query_list"]}}}
{"type": "function", "function": {"name": "text_search", "description": "Searches the web for relevant information based on the given query.", "parameters": {"type": "object", "properties": {"query_list": {"type": "array", "description": "A list of fully-formed semantic queries. The tool will return search results for each query."}}, "required": ["query_list"]}}}
{"type": "function", "function": {"name": "model_search", "description": "Queries an expert model to answer questions based on the given query.", "parameters": {"type": "object", "properties": {"query_list": {"type": "array", "description": "A list of fully-formed semantic queries. The tool will return the response for each query."}}, "required": ["query_list"]}}}
</tools>

For each function call, return a json object with function name and arguments within <tool_call></tool_call> XML tags:
<tool_call>
{"name": <function-name>, "arguments": <args-json-object>}
</tool_call>)PROMPT";

const std::string kUserQuestionPrefix =
    "Please answer the following question according to the system instructions.\n"
    "Question: ";

const std::string kJudgeSystemMessage = R"PROMPT(You are an AI assistant tasked with evaluating the correctness of model responses based on the question, and ground truth answer.
Your judgment should follow these principles:
1. Consider the question, and ground truth answer holistically before evaluating the model's response.
2. Your decision should be strictly Yes or No, based on whether the model's response is factually accurate and aligns with the ground truth answer.
3. If the model response is a more specific form of the ground truth answer, it is correct.
4. If the model response includes all key information but adds minor details, it is correct as long as the extra details are factually correct.
5. If the model response contradicts, modifies, or omits critical parts of the answer, it is incorrect.
6. For numerical values, ensure correctness even when presented in different units.
7. For names, check for first and last name correctness. If the middle name is extra but correct, consider it correct.
8. For yes/no questions, the response must exactly match "Yes" or "No" to be correct.
9. If the model response contains refusal statements, and does not directly answer the question, it must be judged incorrect.
10. If there are multiple candidate answers, you can also evaluate the model's response against all of them. If the response aligns with at least one candidate according to the rules above, it should be considered correct.
Your output must be in the following format: Yes or No)PROMPT";

const std::string kJudgeUserTemplate = R"PROMPT(Question, and Model Response Evaluation
Question: {question}
Ground Truth Answer: {ground_truth_answer}
Candidate Answers: {candidate_answers}
Model Response: {model_response}
Evaluation Instructions
Evaluate whether the Model Response is correct based on the Question, Ground Truth Answer and Candidate Answers.
Follow the predefined judgment rules and provide a clear Yes/No answer without any illustrations.
Output Format Yes or No)PROMPT";

const std::string kQaGenerationTemplate = R"PROMPT(You are a question-answer generation agent for search-intensive multimodal reasoning.

Your task is to generate ONE high-quality QUESTION-ANSWER pair based on a query image and external evidence.

Important constraints:
- The QUESTION must be DIRECTLY ABOUT what is shown in the query image.
- The QUESTION must NOT be answerable using the image alone.
- The ANSWER must be derived ONLY from the external evidence provided below,
  NOT from the query image itself.

You are given the following information:

[Query Image]
- An image is provided as the query.
- You must infer what the image depicts using visual cues only.
- Do NOT assume or invent any textual description of the query image.

[External Textual Evidence]
- Multiple summaries of webpages retrieved via search:
{TEXT_SUMMARIES}

[External Visual Evidence]
- Captions of other visually related images retrieved from the web:
{OTHER_IMAGE_CAPTIONS}

[Instructions for the QUESTION]
1. The question MUST explicitly refer to the content of the query image
   (e.g., the object, structure, location, scene, or event visible in the image).
2. The question MUST require factual knowledge, identification, or context
   that CANNOT be obtained from the image alone.
3. The question SHOULD naturally arise from observing the image
   and then seeking more information.
4. Avoid yes/no questions and avoid vague or subjective wording.
5. Do NOT mention image captions, summaries, search results, or external evidence explicitly.

[Instructions for the ANSWER]
6. The answer MUST be factual, concise, and directly answer the question.
7. The answer MUST be supported by the provided external textual or visual evidence.
8. The answer MUST NOT rely on assumptions or information visible only in the query image.
9. Prefer answers that require synthesizing information from multiple pieces of evidence.
10. The answer MUST NOT be written as a complete grammatical sentence.

[Output Format]
Output exactly the following JSON object and nothing else:

{{
    "question": "<one clear, well-formed question>",
    "answer": "<a concise, factual answer>"
}})PROMPT";

static void replace_all(std::string& s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string render_user_question(const std::string& question_text) {
  return kUserQuestionPrefix + question_text;
}

std::string render_judge_prompt(const std::string& question,
                                const std::string& ground_truth_answer,
                                const std::vector<std::string>& candidate_answers,
                                const std::string& model_response) {
  std::string out = kJudgeUserTemplate;
  std::string candidates = "None";
  if (!candidate_answers.empty()) {
    candidates.clear();
    for (std::size_t i = 0; i < candidate_answers.size(); ++i) {
      if (i) candidates += "; ";
      candidates += candidate_answers[i];
    }
  }
  replace_all(out, "{question}", question);
  replace_all(out, "{ground_truth_answer}", ground_truth_answer);
  replace_all(out, "{candidate_answers}", candidates);
  replace_all(out, "{model_response}", model_response);
  return out;
}

static std::string bullet_list(const std::vector<std::string>& items) {
  if (items.empty()) return "None";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += "- " + items[i];
  }
  return out;
}

std::string render_qa_generation_prompt(const std::vector<std::string>& text_summaries,
                                        const std::vector<std::string>& image_captions) {
  std::string out = kQaGenerationTemplate;
  replace_all(out, "{TEXT_SUMMARIES}", bullet_list(text_summaries));
  replace_all(out, "{OTHER_IMAGE_CAPTIONS}", bullet_list(image_captions));
  replace_all(out, "{{", "{");
  replace_all(out, "}}", "}");
  return out;
}

}  // namespace searchforge::prompts
