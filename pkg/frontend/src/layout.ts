// Client-side force layout for the knowledge graph. Layout is presentation
// only: positions are computed per render from the API export and never sent
// back. Seeded so the same graph body lays out the same way every load.

import type { GraphBody, GraphEdge, GraphNode } from "./types.js";

export interface PlacedNode {
  kind: string;
  key: string;
  attributes: Record<string, unknown>;
  x: number;
  y: number;
  vx: number;
  vy: number;
}

export interface PlacedLink {
  kind: string;
  source: number; // index into nodes
  target: number;
}

export interface GraphModel {
  nodes: PlacedNode[];
  links: PlacedLink[];
  counts: Record<string, number>;
  warnings: string[];
  builtFrom: string;
  /** Edges whose endpoints were not in the node list (should be none). */
  droppedEdges: GraphEdge[];
}

export interface LayoutOptions {
  width: number;
  height: number;
  iterations: number;
  repulsion: number;
  attraction: number;
  linkDistance: number;
  centerGravity: number;
  damping: number;
  maxVelocity: number;
  seed: number;
}

export const DEFAULT_LAYOUT: LayoutOptions = {
  width: 900,
  height: 600,
  iterations: 180,
  repulsion: 6500,
  attraction: 0.01,
  linkDistance: 110,
  centerGravity: 0.03,
  damping: 0.85,
  maxVelocity: 40,
  seed: 7,
};

/** Deterministic PRNG (mulberry32); layout must not depend on Math.random. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Graph body -> draw model. Pure passthrough: every node and every edge
 * with known endpoints is kept, so drawn totals match the API counts. */
export function buildModel(body: GraphBody): GraphModel {
  const index = new Map<string, number>();
  const nodes: PlacedNode[] = body.nodes.map((node: GraphNode, i) => {
    index.set(`${node.kind}:${node.key}`, i);
    return { ...node, x: 0, y: 0, vx: 0, vy: 0 };
  });
  const links: PlacedLink[] = [];
  const droppedEdges: GraphEdge[] = [];
  for (const edge of body.edges) {
    const source = resolveEndpoint(index, edge.from);
    const target = resolveEndpoint(index, edge.to);
    if (source === undefined || target === undefined) {
      droppedEdges.push(edge);
      continue;
    }
    links.push({ kind: edge.kind, source, target });
  }
  return {
    nodes,
    links,
    counts: body.counts,
    warnings: body.warnings,
    builtFrom: body.built_from,
    droppedEdges,
  };
}

// Edge endpoints are bare keys; kinds are implied by the edge kind. A key is
// unambiguous in practice (hashes vs tickers vs slugs), so first match wins.
function resolveEndpoint(index: Map<string, number>, key: string): number | undefined {
  for (const kind of ["memo", "ticker", "analyst", "theme"]) {
    const hit = index.get(`${kind}:${key}`);
    if (hit !== undefined) return hit;
  }
  return undefined;
}

/** Seeded ring start, then repulsion + springs + center gravity. Mutates and
 * returns model.nodes. */
export function runLayout(model: GraphModel, overrides: Partial<LayoutOptions> = {}): PlacedNode[] {
  const opt = { ...DEFAULT_LAYOUT, ...overrides };
  const rand = mulberry32(opt.seed);
  const nodes = model.nodes;
  const cx = opt.width / 2;
  const cy = opt.height / 2;
  const ring = Math.min(opt.width, opt.height) * 0.35;
  nodes.forEach((node, i) => {
    const angle = (i / Math.max(nodes.length, 1)) * Math.PI * 2;
    node.x = cx + ring * Math.cos(angle) + (rand() - 0.5) * 30;
    node.y = cy + ring * Math.sin(angle) + (rand() - 0.5) * 30;
    node.vx = 0;
    node.vy = 0;
  });

  for (let step = 0; step < opt.iterations; step++) {
    // pairwise repulsion; n stays in the low hundreds, O(n^2) is fine
    for (let i = 0; i < nodes.length; i++) {
      for (let j = i + 1; j < nodes.length; j++) {
        const a = nodes[i];
        const b = nodes[j];
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        let d2 = dx * dx + dy * dy;
        if (d2 < 1) {
          // coincident nodes get a deterministic nudge apart
          dx = rand() - 0.5;
          dy = rand() - 0.5;
          d2 = dx * dx + dy * dy;
        }
        const force = opt.repulsion / d2;
        const d = Math.sqrt(d2);
        const fx = (dx / d) * force;
        const fy = (dy / d) * force;
        a.vx += fx;
        a.vy += fy;
        b.vx -= fx;
        b.vy -= fy;
      }
    }
    // springs along links
    for (const link of model.links) {
      const a = nodes[link.source];
      const b = nodes[link.target];
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const d = Math.sqrt(dx * dx + dy * dy) || 1;
      const stretch = (d - opt.linkDistance) * opt.attraction;
      const fx = (dx / d) * stretch;
      const fy = (dy / d) * stretch;
      a.vx += fx;
      a.vy += fy;
      b.vx -= fx;
      b.vy -= fy;
    }
    // gentle pull to center keeps disconnected components on screen
    for (const node of nodes) {
      node.vx += (cx - node.x) * opt.centerGravity;
      node.vy += (cy - node.y) * opt.centerGravity;
      node.vx *= opt.damping;
      node.vy *= opt.damping;
      const speed = Math.sqrt(node.vx * node.vx + node.vy * node.vy);
      if (speed > opt.maxVelocity) {
        node.vx = (node.vx / speed) * opt.maxVelocity;
        node.vy = (node.vy / speed) * opt.maxVelocity;
      }
      node.x += node.vx;
      node.y += node.vy;
    }
  }
  return nodes;
}

/** Pan/zoom state for the svg viewport. */
export interface Transform {
  x: number;
  y: number;
  k: number;
}

export function identityTransform(): Transform {
  return { x: 0, y: 0, k: 1 };
}

export function zoomAt(t: Transform, px: number, py: number, factor: number): Transform {
  const k = Math.min(8, Math.max(0.2, t.k * factor));
  const scale = k / t.k;
  // keep the point under the cursor fixed while scaling
  return { k, x: px - (px - t.x) * scale, y: py - (py - t.y) * scale };
}

export function panBy(t: Transform, dx: number, dy: number): Transform {
  return { ...t, x: t.x + dx, y: t.y + dy };
}
