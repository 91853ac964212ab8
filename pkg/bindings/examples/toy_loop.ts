/**
 * Minimal training-loop walkthrough: obtain scorings for ten instances
 * through the replay transport, run the group reward pipeline, and print
 * per-rollout advantages.
 *
 * Run with: npm run example
 */
import fs from "node:fs";
import path from "node:path";

import { BoundEngine } from "../src/index.js";
import type { Rubric, ScoringOutput } from "../src/index.js";
import { FIXTURES, startServer } from "../test/server.js";

interface CorpusInstance {
  id: string;
  prompt: string;
  image_ref: string;
  rubric: Rubric;
  responses: string[];
  response_lengths: number[];
}

async function main(): Promise<void> {
  const corpus: CorpusInstance[] = fs
    .readFileSync(path.join(FIXTURES, "corpus.jsonl"), "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as CorpusInstance)
    .slice(0, 10);

  const server = await startServer(8899);
  const engine = new BoundEngine({ baseUrl: server.baseUrl });
  try {
    for (const instance of corpus) {
      const scorings: ScoringOutput[] = [];
      for (let j = 0; j < instance.responses.length; j++) {
        scorings.push(
          await engine.requestScoring({
            prompt_text: instance.prompt,
            response: instance.responses[j],
            response_length: instance.response_lengths[j],
            image_ref: instance.image_ref,
            instance_id: instance.id,
            rubric: instance.rubric,
          }),
        );
      }
      const rollouts = await engine.scoreGroup(
        instance.rubric,
        scorings,
        instance.response_lengths,
        { responses: instance.responses, formatRules: {} },
      );
      const advantages = rollouts.map((r) => r.advantage.toFixed(4)).join(", ");
      console.log(`${instance.id}: advantages [${advantages}]`);
    }
  } finally {
    server.stop();
  }
}

main().catch((error) => {
  console.error(error);
  process.exit(1);
});
