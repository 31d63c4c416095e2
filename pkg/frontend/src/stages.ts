/**
 * Stage-line assembly and line-level pipeline edits.
 *
 * The server stores pipeline text byte for byte, so edits are line surgery:
 * everything the user did not touch survives, comments included. Appends go
 * through the JSON endpoint (whose body mirrors the grammar keys); slider
 * updates rewrite exactly one line and PUT the whole text back.
 */

import type { DeconvStage, InterpStage, NoiseMode, Source, Stage } from "./grammar.js";
import { serialize } from "./grammar.js";

/** One grammar line, no trailing newline. */
export function stageLine(stage: Stage): string {
  return serialize([stage]).trimEnd();
}

/** JSON body for POST .../pipeline/stages. */
export function stageBody(stage: Stage): Record<string, unknown> {
  switch (stage.kind) {
    case "interp1":
    case "interp2": {
      const body: Record<string, unknown> = {
        kind: stage.kind,
        p2: stage.p2,
        p3: stage.p3,
        p4: stage.p4,
      };
      if (stage.geometry === "step3") body.geom = "step3";
      return body;
    }
    case "magnify":
      return { kind: "magnify", gamma: stage.gamma };
    case "deconv":
      return {
        kind: "deconv",
        L: stage.L,
        theta: stage.theta,
        source: stage.source,
        amount: stage.amount,
        noise: stage.noise,
      };
  }
}

export function deconvFromCell(
  L: number,
  theta: number,
  opts: { source: Source; amount: number; noise: NoiseMode },
): DeconvStage {
  return { kind: "deconv", L, theta, source: opts.source, amount: opts.amount, noise: opts.noise };
}

export function interpFromSliders(
  level: 1 | 2,
  p2: number,
  p3: number,
  p4: number,
): InterpStage {
  return { kind: level === 1 ? "interp1" : "interp2", p2, p3, p4, geometry: "even-step" };
}

/**
 * Replace the first line whose stage kind matches, leaving every other
 * byte alone. Returns null when no line matches, in which case the caller
 * appends a new stage instead.
 */
export function replaceFirstKind(text: string, kind: string, newLine: string): string | null {
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const body = lines[i].split("#", 1)[0].trim();
    if (!body) continue;
    if (body.split(/\s+/)[0] === kind) {
      lines[i] = newLine;
      return lines.join("\n");
    }
  }
  return null;
}

export interface ExportBundle {
  filename: string;
  text: string;
  cliHint: string;
}

/**
 * The exported file is the server text verbatim; running the hint command
 * on the original upload reproduces the preview byte for byte.
 */
export function exportBundle(text: string, uploadName: string, step: number): ExportBundle {
  const isLab = uploadName.toLowerCase().endsWith(".lab");
  const stepFlag = isLab ? "" : ` --step ${step}`;
  return {
    filename: "pipeline.txt",
    text,
    cliHint: `unpixel pipeline-run pipeline.txt ${uploadName} preview.png${stepFlag}`,
  };
}
