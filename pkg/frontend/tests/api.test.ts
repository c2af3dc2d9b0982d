import { describe, expect, it } from "vitest";

import { ApiClient, GatewayError } from "../src/api.js";

function fakeFetch(
  handler: (url: string, init?: RequestInit) => { status: number; body: unknown }
): typeof fetch {
  return (async (url: RequestInfo | URL, init?: RequestInit) => {
    const { status, body } = handler(String(url), init);
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    } as Response;
  }) as typeof fetch;
}

describe("ApiClient", () => {
  it("targets the configured base URL and strips trailing slashes", async () => {
    const seen: string[] = [];
    const client = new ApiClient(
      "http://gateway:9000///",
      fakeFetch((url) => {
        seen.push(url);
        return { status: 200, body: { session_id: "s1" } };
      })
    );
    await client.createSession();
    expect(seen).toEqual(["http://gateway:9000/sessions"]);
  });

  it("posts turns as {user_text} and returns the record", async () => {
    const client = new ApiClient(
      "http://x",
      fakeFetch((url, init) => {
        expect(url).toBe("http://x/sessions/s1/turns");
        expect(JSON.parse(String(init?.body))).toEqual({ user_text: "hello" });
        return { status: 200, body: { turn: 0, status: "ok" } };
      })
    );
    const record = await client.submitTurn("s1", "hello");
    expect(record.turn).toBe(0);
  });

  it("passes the revision query through", async () => {
    const client = new ApiClient(
      "http://x",
      fakeFetch((url) => {
        expect(url).toBe("http://x/sessions/s1/scene?revision=2");
        return { status: 200, body: { objects: [], environment: {}, revision: 2 } };
      })
    );
    const scene = await client.getScene("s1", 2);
    expect(scene.revision).toBe(2);
  });

  it("raises GatewayError with the server's error body", async () => {
    const client = new ApiClient(
      "http://x",
      fakeFetch(() => ({
        status: 409,
        body: { stage: "turn", message: "a turn is already in progress", retriable: true },
      }))
    );
    await expect(client.submitTurn("s1", "hi")).rejects.toSatisfy((err: unknown) => {
      return err instanceof GatewayError && err.body.stage === "turn" && err.body.retriable;
    });
  });

  it("wraps non-gateway failures as a transport error", async () => {
    const client = new ApiClient(
      "http://x",
      fakeFetch(() => ({ status: 502, body: { detail: "bad gateway" } }))
    );
    await expect(client.getMemory("s1")).rejects.toSatisfy((err: unknown) => {
      return err instanceof GatewayError && err.body.stage === "transport" && err.body.retriable;
    });
  });
});
