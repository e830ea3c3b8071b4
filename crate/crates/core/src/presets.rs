//! Built-in network layouts for the two evaluation domains: a bibliographic
//! network (authors, papers, venues, terms) and an event-based social
//! network (users, groups, events, locations), each with its selected
//! meta-paths and the user-to-item path that defines the rating matrix.

pub const DBLP_SCHEMA: &str = "\
type Author user
type Paper
type Conf item
type Term
relation writes Author Paper
relation published_in Paper Conf
relation contains Paper Term
relation cites Paper Paper
";

pub const DBLP_METAPATHS: &str = "\
# author-author
UU: Author -writes-> Paper <-writes- Author
UU: Author -writes-> Paper -published_in-> Conf <-published_in- Paper <-writes- Author
UU: Author -writes-> Paper -contains-> Term <-contains- Paper <-writes- Author
# venue-venue
II: Conf <-published_in- Paper <-writes- Author -writes-> Paper -published_in-> Conf
II: Conf <-published_in- Paper -cites-> Paper -published_in-> Conf
II: Conf <-published_in- Paper -contains-> Term <-contains- Paper -published_in-> Conf
# author-venue
UI: Author -writes-> Paper -contains-> Term <-contains- Paper -published_in-> Conf
UI: Author -writes-> Paper -cites-> Paper -published_in-> Conf
";

pub const DBLP_TARGET: &str = "Author -writes-> Paper -published_in-> Conf";

pub const MEETUP_SCHEMA: &str = "\
type User user
type Group item
type Event
type Location
relation friend User User
relation member User Group
relation attends User Event
relation lives_in User Location
relation hosts Group Event
relation held_at Event Location
";

pub const MEETUP_METAPATHS: &str = "\
# user-user
UU: User -lives_in-> Location <-lives_in- User
UU: User -member-> Group <-member- User
UU: User -attends-> Event <-attends- User
UU: User -friend-> User
# group-group
II: Group <-member- User -member-> Group
II: Group -hosts-> Event -held_at-> Location <-held_at- Event <-hosts- Group
II: Group <-member- User -friend-> User -member-> Group
# user-group
UI: User -friend-> User -member-> Group
UI: User -attends-> Event <-hosts- Group
UI: User -lives_in-> Location <-held_at- Event <-hosts- Group
";

pub const MEETUP_TARGET: &str = "User -member-> Group";
